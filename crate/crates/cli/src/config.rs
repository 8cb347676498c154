//! Harness configuration: one TOML file, every field optional.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use ipp_core::baselines::{CoverageConfig, GreedyConfig, MctsConfig, RandomConfig};
use ipp_core::{
    Coverage, DecayFunction, DeskScenario, Greedy, IaTigris, Mcts, MissionModel, MissionSetup,
    Planner, PlannerConfig, RandomPlanner, SimConfig, Termination,
};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlannerKind {
    IaTigris,
    Mcts,
    Greedy,
    Random,
    Coverage,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 5] = [
        PlannerKind::IaTigris,
        PlannerKind::Mcts,
        PlannerKind::Greedy,
        PlannerKind::Random,
        PlannerKind::Coverage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::IaTigris => "ia-tigris",
            PlannerKind::Mcts => "mcts",
            PlannerKind::Greedy => "greedy",
            PlannerKind::Random => "random",
            PlannerKind::Coverage => "coverage",
        }
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlannerKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        PlannerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .with_context(|| format!("unknown planner '{s}' (expected one of ia-tigris, mcts, greedy, random, coverage)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    pub planners: Vec<PlannerKind>,
    pub trials: usize,
    /// Budgets to run; empty means the scenario budget only.
    pub budgets: Vec<f64>,
    /// Trial `t` uses environment seed `seed + t` for every planner.
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            planners: PlannerKind::ALL.to_vec(),
            trials: 30,
            budgets: Vec::new(),
            seed: 0,
            workers: 1,
            out: PathBuf::from("results"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub extend: Vec<f64>,
    pub near: Vec<f64>,
    pub prune: Vec<f64>,
    pub envs: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            extend: vec![150.0, 300.0, 450.0],
            near: vec![75.0, 300.0, 450.0],
            prune: vec![60.0, 120.0, 240.0],
            envs: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationConfig {
    pub trials: usize,
    /// Capped arm of the horizon ablation (m).
    pub horizon: f64,
    /// Weight of the favoured cluster in the priority/time demonstration.
    pub priority_weight: f64,
    pub decay: DecayFunction,
    /// Compute budgets (evaluations) of the embedding timing curve.
    pub embedding_evals: Vec<usize>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            trials: 50,
            horizon: 1000.0,
            priority_weight: 4.0,
            decay: DecayFunction::new(0.2, -0.01),
            embedding_evals: vec![250, 500, 1000, 1500, 2000],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    pub scenario: DeskScenario,
    pub mission: MissionModel,
    pub sim: SimConfig,
    /// Count information evaluations instead of wall-clock planning time.
    pub deterministic: bool,
    /// Wall-clock planning time per cycle when not deterministic (s).
    pub planning_time: f64,
    pub tigris: PlannerConfig,
    pub mcts: MctsConfig,
    pub greedy: GreedyConfig,
    pub random: RandomConfig,
    pub coverage: CoverageConfig,
    pub campaign: CampaignConfig,
    pub sweep: SweepConfig,
    pub ablation: AblationConfig,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            scenario: DeskScenario::default(),
            mission: MissionModel::default(),
            sim: SimConfig::default(),
            deterministic: true,
            planning_time: 1.0,
            tigris: PlannerConfig::default(),
            mcts: MctsConfig::default(),
            greedy: GreedyConfig::default(),
            random: RandomConfig::default(),
            coverage: CoverageConfig::default(),
            campaign: CampaignConfig::default(),
            sweep: SweepConfig::default(),
            ablation: AblationConfig::default(),
        }
    }
}

impl HarnessConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.campaign.trials == 0 {
            bail!("campaign.trials must be at least 1");
        }
        if self.campaign.planners.is_empty() {
            bail!("campaign.planners is empty");
        }
        if self.budgets().iter().any(|&b| !(b > 0.0)) {
            bail!("budgets must be positive");
        }
        if !self.deterministic && !(self.planning_time > 0.0) {
            bail!("planning_time must be positive");
        }
        if self.deterministic && self.scenario.evaluations == 0 {
            bail!("scenario.evaluations must be at least 1");
        }
        self.scenario.distribution.validate()?;
        self.sim.validate()?;
        self.tigris.validate()?;
        Ok(())
    }

    pub fn budgets(&self) -> Vec<f64> {
        if self.campaign.budgets.is_empty() {
            vec![self.scenario.budget]
        } else {
            self.campaign.budgets.clone()
        }
    }

    pub fn termination(&self) -> Termination {
        if self.deterministic {
            Termination::Evaluations(self.scenario.evaluations)
        } else {
            Termination::WallClock(self.planning_time)
        }
    }

    pub fn tigris_config(&self, seed: u64) -> PlannerConfig {
        PlannerConfig {
            termination: self.termination(),
            seed,
            ..self.tigris.clone()
        }
    }

    /// Planner of `kind` with the configured knobs and the given seed.
    pub fn planner(&self, kind: PlannerKind, seed: u64) -> Result<Box<dyn Planner>> {
        Ok(match kind {
            PlannerKind::IaTigris => Box::new(IaTigris::new(self.tigris_config(seed))?),
            PlannerKind::Mcts => Box::new(Mcts::new(MctsConfig {
                termination: self.termination(),
                seed,
                ..self.mcts.clone()
            })),
            PlannerKind::Greedy => Box::new(Greedy::new(self.greedy.clone())),
            PlannerKind::Random => Box::new(RandomPlanner::new(RandomConfig {
                seed,
                ..self.random.clone()
            })),
            PlannerKind::Coverage => Box::new(Coverage::new(self.coverage.clone())),
        })
    }

    pub fn setup(&self, budget: f64, seed: u64) -> MissionSetup {
        MissionSetup {
            start: self.scenario.start,
            budget,
            bounds: self.scenario.bounds,
            mission: self.mission.clone(),
            seed,
        }
    }

    pub fn env_seed(&self, trial: usize) -> u64 {
        self.campaign.seed.wrapping_add(trial as u64)
    }

    /// Single-line JSON used in output headers.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg: HarnessConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, HarnessConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn partial_sections_override() {
        let cfg: HarnessConfig = toml::from_str(
            "deterministic = false\n[campaign]\ntrials = 3\nplanners = [\"random\", \"coverage\"]\n[scenario]\nbudget = 1500.0\n",
        )
        .unwrap();
        assert_eq!(cfg.campaign.trials, 3);
        assert_eq!(cfg.campaign.planners, vec![PlannerKind::Random, PlannerKind::Coverage]);
        assert_eq!(cfg.budgets(), vec![1500.0]);
        assert_eq!(cfg.termination(), Termination::WallClock(1.0));
        assert_eq!(cfg.scenario.cell_size, 15.0);
    }

    #[test]
    fn planner_names_round_trip() {
        for k in PlannerKind::ALL {
            assert_eq!(k.name().parse::<PlannerKind>().unwrap(), k);
        }
        assert!("rrt".parse::<PlannerKind>().is_err());
    }
}
