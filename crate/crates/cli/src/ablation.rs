//! Ablations: tree recycling, incremental belief embedding, planning
//! horizon, and priority/time weighting.

use std::path::Path;
use std::time::Instant;

use anyhow::Result;
use ipp_core::env::Cluster;
use ipp_core::geometry::ground_polygon;
use ipp_core::{
    run_mission, BeliefMap, CameraModel, EnvSpec, IaTigris, MissionModel, MissionSetup, PlanRequest, Planner,
    Pose,
    Termination,
};
use serde::{Deserialize, Serialize};

use crate::campaign::{fly, parallel_map};
use crate::config::HarnessConfig;
use crate::output::{write_csv, Header};
use crate::stats::{paired_t, summarize, PairedTest, Summary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplanArm {
    NoReplan,
    Fresh,
    Recycle,
}

impl ReplanArm {
    pub const ALL: [ReplanArm; 3] = [ReplanArm::NoReplan, ReplanArm::Fresh, ReplanArm::Recycle];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmRow {
    pub arm: ReplanArm,
    pub trial: usize,
    pub env_seed: u64,
    pub final_pct_reduction: f64,
    pub path_length: f64,
    pub max_plan_overrun: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecycleAblation {
    pub rows: Vec<ArmRow>,
    /// Per-arm summaries in [`ReplanArm::ALL`] order.
    pub arms: Vec<(ReplanArm, Summary)>,
    pub recycle_vs_noreplan: Option<PairedTest>,
    pub recycle_vs_fresh: Option<PairedTest>,
    pub fresh_vs_noreplan: Option<PairedTest>,
}

impl RecycleAblation {
    pub fn mean(&self, arm: ReplanArm) -> f64 {
        self.arms.iter().find(|(a, _)| *a == arm).map_or(f64::NAN, |(_, s)| s.mean)
    }

    fn values(rows: &[ArmRow], arm: ReplanArm) -> Vec<f64> {
        rows.iter().filter(|r| r.arm == arm).map(|r| r.final_pct_reduction).collect()
    }
}

/// IA-TIGRIS flown without replanning, replanning from scratch, and
/// replanning with a recycled tree, on paired environments. Trials where any
/// arm fails are dropped from every arm.
pub fn recycle(cfg: &HarnessConfig) -> Result<RecycleAblation> {
    cfg.validate()?;
    let budget = cfg.budgets()[0];
    let jobs: Vec<(usize, ReplanArm)> = (0..cfg.ablation.trials)
        .flat_map(|t| ReplanArm::ALL.into_iter().map(move |a| (t, a)))
        .collect();
    let results = parallel_map(&jobs, cfg.campaign.workers, |&(trial, arm)| {
        let seed = cfg.env_seed(trial);
        let mut pc = cfg.tigris_config(seed);
        let mut sim = cfg.sim.clone();
        match arm {
            ReplanArm::NoReplan => sim.replanning = false,
            ReplanArm::Fresh => pc.recycle = false,
            ReplanArm::Recycle => pc.recycle = true,
        }
        let out = IaTigris::new(pc)
            .map_err(anyhow::Error::from)
            .and_then(|mut p| fly(cfg, &mut p, &sim, budget, seed));
        match out {
            Ok(r) => Some(ArmRow {
                arm,
                trial,
                env_seed: seed,
                final_pct_reduction: r.summary.final_pct_reduction,
                path_length: r.summary.path_length,
                max_plan_overrun: r.summary.max_plan_overrun,
            }),
            Err(e) => {
                log::error!("recycle ablation {arm:?} trial {trial}: {e:#}");
                None
            }
        }
    });
    let mut rows = Vec::new();
    for trial in 0..cfg.ablation.trials {
        let group: Vec<&Option<ArmRow>> = jobs.iter().zip(&results).filter(|(j, _)| j.0 == trial).map(|(_, r)| r).collect();
        if group.iter().all(|r| r.is_some()) {
            rows.extend(group.into_iter().flatten().cloned());
        }
    }
    let v = |a| RecycleAblation::values(&rows, a);
    let arms = ReplanArm::ALL.into_iter().map(|a| (a, summarize(&v(a)))).collect();
    Ok(RecycleAblation {
        arms,
        recycle_vs_noreplan: paired_t(&v(ReplanArm::Recycle), &v(ReplanArm::NoReplan)),
        recycle_vs_fresh: paired_t(&v(ReplanArm::Recycle), &v(ReplanArm::Fresh)),
        fresh_vs_noreplan: paired_t(&v(ReplanArm::Fresh), &v(ReplanArm::NoReplan)),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRow {
    pub env_seed: u64,
    pub evaluations: usize,
    pub embedding: bool,
    pub tree_size: usize,
    pub info_evals: usize,
    pub info_secs: f64,
    pub build_secs: f64,
    /// Mean time per information evaluation (microseconds).
    pub per_eval_us: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateRow {
    pub env_seed: u64,
    pub evaluations: usize,
    /// Size of the tree handed to the recycling pass.
    pub tree_size: usize,
    pub survivors: usize,
    /// Time to grow that tree from scratch.
    pub build_secs: f64,
    pub update_secs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingAblation {
    pub embedding: Vec<EmbeddingRow>,
    pub updates: Vec<UpdateRow>,
}

impl TimingAblation {
    /// Total information time over total evaluations, per arm.
    pub fn per_eval_secs(&self, embedding: bool) -> f64 {
        let rows = self.embedding.iter().filter(|r| r.embedding == embedding);
        let (secs, n) = rows.fold((0.0, 0usize), |(s, n), r| (s + r.info_secs, n + r.info_evals));
        secs / n as f64
    }

    /// Embedding-on per-evaluation time as a fraction of replay.
    pub fn embedding_ratio(&self) -> f64 {
        self.per_eval_secs(true) / self.per_eval_secs(false)
    }

    /// Summed recycling time over summed from-scratch build time of the same trees.
    pub fn update_ratio(&self) -> f64 {
        let u: f64 = self.updates.iter().map(|r| r.update_secs).sum();
        let b: f64 = self.updates.iter().map(|r| r.build_secs).sum();
        u / b
    }
}

/// Planning-cycle timings on the desk scenario, single-threaded. For each
/// environment and compute budget, one tree is grown with and without the
/// incremental embedding; the embedded tree is then recycled from its
/// second plan node.
pub fn timing(cfg: &HarnessConfig, envs: usize) -> Result<TimingAblation> {
    cfg.validate()?;
    let budget = cfg.budgets()[0];
    let mut out = TimingAblation { embedding: Vec::new(), updates: Vec::new() };
    for trial in 0..envs {
        let seed = cfg.env_seed(trial);
        let req = PlanRequest {
            start: cfg.scenario.start,
            budget,
            map: cfg.scenario.env(seed)?.belief_map()?,
            bounds: cfg.scenario.bounds,
            mission: cfg.mission.clone(),
        };
        for &evals in &cfg.ablation.embedding_evals {
            for embedding in [true, false] {
                let mut pc = cfg.tigris_config(seed);
                pc.termination = Termination::Evaluations(evals);
                pc.embedding = embedding;
                let mut p = IaTigris::new(pc)?;
                let plan = p.plan(&req)?;
                let st = p.stats();
                out.embedding.push(EmbeddingRow {
                    env_seed: seed,
                    evaluations: evals,
                    embedding,
                    tree_size: st.tree_size,
                    info_evals: st.info_evals,
                    info_secs: st.info_secs,
                    build_secs: st.build_secs,
                    per_eval_us: 1e6 * st.info_secs / st.info_evals.max(1) as f64,
                });
                if !embedding {
                    continue;
                }
                let Some(next) = plan.waypoints.iter().filter(|w| w.node).nth(1) else {
                    continue;
                };
                let moved = PlanRequest { start: next.pose, budget: budget - next.cost, ..req.clone() };
                let ctx = moved.mission.reward_context(&moved.map);
                let t0 = Instant::now();
                p.update_graph(&moved, moved.budget, &ctx)?;
                let update_secs = t0.elapsed().as_secs_f64();
                out.updates.push(UpdateRow {
                    env_seed: seed,
                    evaluations: evals,
                    tree_size: st.tree_size,
                    survivors: p.tree().map_or(0, |t| t.len()),
                    build_secs: st.build_secs,
                    update_secs,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonRow {
    pub map: String,
    pub arm: String,
    pub trial: usize,
    pub final_pct_reduction: f64,
    pub clusters: usize,
    pub clusters_observed: usize,
}

/// Full-budget planning against a capped horizon on sparse (4-cluster) and
/// dense (20-cluster) maps. A cluster counts as observed when the belief at
/// its centre cell moved from the prior.
pub fn horizon(cfg: &HarnessConfig) -> Result<Vec<HorizonRow>> {
    cfg.validate()?;
    let budget = cfg.budgets()[0];
    let maps = [("sparse", 4usize), ("dense", 20usize)];
    let arms = [("full", None), ("capped", Some(cfg.ablation.horizon))];
    let mut jobs = Vec::new();
    for (mi, _) in maps.iter().enumerate() {
        for (ai, _) in arms.iter().enumerate() {
            for t in 0..cfg.ablation.trials {
                jobs.push((mi, ai, t));
            }
        }
    }
    let rows = parallel_map(&jobs, cfg.campaign.workers, |&(mi, ai, trial)| -> Result<HorizonRow> {
        let (map_name, count) = maps[mi];
        let (arm_name, cap) = arms[ai];
        let seed = cfg.env_seed(trial);
        let mut dist = cfg.scenario.distribution;
        dist.count = (count, count);
        let env = EnvSpec::generate(&dist, cfg.scenario.bounds, cfg.scenario.cell_size, seed)?;
        let prior = env.belief_map()?;
        let mut pc = cfg.tigris_config(seed);
        pc.horizon = cap;
        let mut p = IaTigris::new(pc)?;
        let r = run_mission(&prior, &cfg.setup(budget, seed), &mut p, &cfg.sim)?;
        let observed = env
            .clusters
            .iter()
            .filter(|c| {
                prior
                    .cell_at(c.center.0, c.center.1)
                    .is_some_and(|i| (r.final_belief.prob(i) - prior.prob(i)).abs() > 1e-12)
            })
            .count();
        Ok(HorizonRow {
            map: map_name.into(),
            arm: arm_name.into(),
            trial,
            final_pct_reduction: r.summary.final_pct_reduction,
            clusters: env.clusters.len(),
            clusters_observed: observed,
        })
    });
    rows.into_iter().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorityRow {
    pub scenario: String,
    pub trial: usize,
    pub cluster: String,
    /// Distance flown when a core cell of the cluster first came into view;
    /// NaN if never.
    pub first_seen: f64,
    /// Distance flown with at least one core cell in view.
    pub in_view: f64,
    pub final_pct_reduction: f64,
}

/// Names of the three clusters of the priority/time demonstration.
pub const PRIORITY_CLUSTERS: [&str; 3] = ["near-right", "mid-left", "far-left"];

/// Three equal clusters (near the start on the right, mid-left, far-left)
/// flown with equal weights, with the far-left cluster weighted up, and with
/// that weighting plus time decay. The camera is pitched down so the
/// observed strip follows the flight path.
pub fn priority_time(cfg: &HarnessConfig) -> Result<Vec<PriorityRow>> {
    cfg.validate()?;
    let b = cfg.scenario.bounds;
    let at = |fx: f64, fy: f64| (b.x_min + fx * b.width(), b.y_min + fy * b.height());
    let centres = [at(0.75, 0.3), at(0.25, 0.45), at(0.1, 0.85)];
    let sigma = 0.06 * b.width().min(b.height());
    let (sx, sy) = at(0.5, 0.1);
    let start = Pose::new(sx, sy, 50.0, std::f64::consts::FRAC_PI_2);
    let env = EnvSpec {
        bounds: b,
        cell_size: cfg.scenario.cell_size,
        clusters: centres.iter().map(|&center| Cluster { center, sigma, peak: 0.5 }).collect(),
        seed: 0,
    };
    let base = env.belief_map()?;
    let near = |i: u32, c: (f64, f64), r: f64| {
        let (x, y) = base.cell_center(i);
        (x - c.0).hypot(y - c.1) <= r
    };
    let core: Vec<Vec<(f64, f64)>> = centres
        .iter()
        .map(|&c| (0..base.len() as u32).filter(|&i| near(i, c, sigma)).map(|i| base.cell_center(i)).collect())
        .collect();
    let mut weighted = base.clone();
    let far = centres[2];
    weighted.set_priorities(
        (0..base.len() as u32)
            .map(|i| if near(i, far, 3.0 * sigma) { cfg.ablation.priority_weight } else { 1.0 })
            .collect(),
    )?;
    let mut plain = cfg.mission.clone();
    plain.camera = CameraModel::new(60f64.to_radians(), plain.camera.hfov, plain.camera.vfov, plain.camera.max_range)?;
    let mut decayed = plain.clone();
    decayed.decay = cfg.ablation.decay;
    let scenarios: [(&str, &BeliefMap, &MissionModel); 3] =
        [("equal", &base, &plain), ("priority", &weighted, &plain), ("priority-decay", &weighted, &decayed)];

    let jobs: Vec<(usize, usize)> = (0..3).flat_map(|s| (0..cfg.ablation.trials).map(move |t| (s, t))).collect();
    let runs = parallel_map(&jobs, cfg.campaign.workers, |&(si, trial)| -> Result<Vec<PriorityRow>> {
        let (name, map, mission) = scenarios[si];
        let seed = cfg.env_seed(trial);
        let setup = MissionSetup { start, budget: cfg.budgets()[0], bounds: b, mission: mission.clone(), seed };
        let mut p = IaTigris::new(cfg.tigris_config(seed))?;
        let r = run_mission(map, &setup, &mut p, &cfg.sim)?;
        let mut first = [f64::NAN; 3];
        let mut in_view = [0.0; 3];
        for w in r.trace.windows(2) {
            let row = &w[1];
            let pose = Pose::new(row.x, row.y, row.z, row.psi);
            let Some(g) = ground_polygon(&pose, &mission.camera) else { continue };
            for k in 0..3 {
                if core[k].iter().any(|&(x, y)| g.contains(x, y)) {
                    if first[k].is_nan() {
                        first[k] = row.t * mission.speed;
                    }
                    in_view[k] += (row.t - w[0].t) * mission.speed;
                }
            }
        }
        Ok((0..3)
            .map(|k| PriorityRow {
                scenario: name.into(),
                trial,
                cluster: PRIORITY_CLUSTERS[k].into(),
                first_seen: first[k],
                in_view: in_view[k],
                final_pct_reduction: r.summary.final_pct_reduction,
            })
            .collect())
    });
    Ok(runs.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect())
}

/// Fraction of trials in `scenario` where cluster `a` came into view before
/// cluster `b` (never seen counts as last).
pub fn seen_before_fraction(rows: &[PriorityRow], scenario: &str, a: &str, b: &str) -> f64 {
    let key = |x: f64| if x.is_nan() { f64::INFINITY } else { x };
    let first = |trial: usize, c: &str| {
        rows.iter()
            .find(|r| r.scenario == scenario && r.trial == trial && r.cluster == c)
            .map_or(f64::INFINITY, |r| key(r.first_seen))
    };
    let mut trials: Vec<usize> = rows.iter().filter(|r| r.scenario == scenario).map(|r| r.trial).collect();
    trials.dedup();
    let n = trials.iter().filter(|&&t| first(t, a) < first(t, b)).count();
    n as f64 / trials.len().max(1) as f64
}

/// Runs the named ablation and writes its CSVs under `dir`, returning a
/// printable summary.
pub fn run_and_write(cfg: &HarnessConfig, which: &str, dir: &Path) -> Result<String> {
    let header = Header::new(&format!("ablate {which}"), cfg);
    let mut s = String::new();
    use std::fmt::Write;
    match which {
        "recycle" => {
            let a = recycle(cfg)?;
            write_csv(&dir.join("ablation_recycle.csv"), &header, &a.rows)?;
            for (arm, sm) in &a.arms {
                let _ = writeln!(s, "{arm:?}: {:.2} +- {:.2} (n {})", sm.mean, sm.ci95, sm.n);
            }
            for (name, t) in [
                ("recycle > no-replan", a.recycle_vs_noreplan),
                ("recycle > fresh", a.recycle_vs_fresh),
                ("fresh > no-replan", a.fresh_vs_noreplan),
            ] {
                if let Some(t) = t {
                    let _ = writeln!(s, "{name}: diff {:.2}, t {:.3}, p {:.2e}", t.mean_diff, t.t, t.p_greater);
                }
            }
        }
        "embedding" => {
            let a = timing(cfg, cfg.ablation.trials.min(5))?;
            write_csv(&dir.join("ablation_embedding.csv"), &header, &a.embedding)?;
            write_csv(&dir.join("ablation_update.csv"), &header, &a.updates)?;
            let _ = writeln!(
                s,
                "per evaluation: embedding {:.1} us, replay {:.1} us, ratio {:.3}",
                1e6 * a.per_eval_secs(true),
                1e6 * a.per_eval_secs(false),
                a.embedding_ratio()
            );
            let _ = writeln!(s, "recycling / from-scratch build time: {:.3}", a.update_ratio());
        }
        "horizon" => {
            let rows = horizon(cfg)?;
            write_csv(&dir.join("ablation_horizon.csv"), &header, &rows)?;
            for map in ["sparse", "dense"] {
                for arm in ["full", "capped"] {
                    let sel: Vec<&HorizonRow> = rows.iter().filter(|r| r.map == map && r.arm == arm).collect();
                    let red = summarize(&sel.iter().map(|r| r.final_pct_reduction).collect::<Vec<_>>());
                    let obs = summarize(&sel.iter().map(|r| r.clusters_observed as f64).collect::<Vec<_>>());
                    let _ = writeln!(
                        s,
                        "{map} {arm}: reduction {:.2} +- {:.2}, clusters observed {:.2}",
                        red.mean, red.ci95, obs.mean
                    );
                }
            }
        }
        "priority" => {
            let rows = priority_time(cfg)?;
            write_csv(&dir.join("ablation_priority.csv"), &header, &rows)?;
            for sc in ["equal", "priority", "priority-decay"] {
                let _ = writeln!(
                    s,
                    "{sc}: far-left seen before near-right in {:.0}% of trials",
                    100.0 * seen_before_fraction(&rows, sc, "far-left", "near-right")
                );
                for c in PRIORITY_CLUSTERS {
                    let sel: Vec<&PriorityRow> = rows.iter().filter(|r| r.scenario == sc && r.cluster == c).collect();
                    let seen: Vec<f64> = sel.iter().map(|r| r.first_seen).filter(|x| x.is_finite()).collect();
                    let view = summarize(&sel.iter().map(|r| r.in_view).collect::<Vec<_>>());
                    let _ = writeln!(
                        s,
                        "  {c:<10} seen in {}/{} trials, first at {:.0} m, {:.0} m in view",
                        seen.len(),
                        sel.len(),
                        summarize(&seen).mean,
                        view.mean
                    );
                }
            }
        }
        other => anyhow::bail!("unknown ablation '{other}' (expected recycle, embedding, horizon, priority)"),
    }
    Ok(s)
}

