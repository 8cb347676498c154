use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ipp_cli::ablation;
use ipp_cli::campaign::{run_campaign, write_campaign, SummaryRow};
use ipp_cli::output::{read_csv, write_csv, Header};
use ipp_cli::report::report;
use ipp_cli::sweep::run_sweep;
use ipp_cli::{HarnessConfig, PlannerKind};

#[derive(Parser)]
#[command(name = "ipp", version, about = "Informative path planning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one random prior and write it as JSON.
    GenEnv {
        #[command(flatten)]
        common: Common,
    },
    /// Fly every planner over paired environments and write CSVs.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep extend distance, near radius and prune radius.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Run an ablation: recycle, embedding, horizon, priority or all.
    Ablate {
        which: String,
        #[command(flatten)]
        common: Common,
    },
    /// Re-aggregate a campaign directory from its runs.csv.
    Report { dir: PathBuf },
}

#[derive(Args)]
struct Common {
    /// TOML harness config; every field is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base environment seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated planners (ia-tigris, mcts, greedy, random, coverage).
    #[arg(long, value_delimiter = ',')]
    planners: Vec<PlannerKind>,
    /// Budget in metres; repeat for several.
    #[arg(long)]
    budget: Vec<f64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Bound planning by information evaluations instead of wall-clock time.
    #[arg(long, conflicts_with = "planning_time")]
    deterministic: bool,
    /// Wall-clock planning time per cycle (s); disables deterministic mode.
    #[arg(long)]
    planning_time: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<HarnessConfig> {
        let mut cfg = match &self.config {
            Some(p) => HarnessConfig::load(p)?,
            None => HarnessConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.campaign.seed = s;
        }
        if !self.planners.is_empty() {
            cfg.campaign.planners = self.planners.clone();
        }
        if !self.budget.is_empty() {
            cfg.campaign.budgets = self.budget.clone();
        }
        if let Some(t) = self.trials {
            cfg.campaign.trials = t;
            cfg.ablation.trials = t;
            cfg.sweep.envs = t;
        }
        if self.deterministic {
            cfg.deterministic = true;
        }
        if let Some(t) = self.planning_time {
            cfg.deterministic = false;
            cfg.planning_time = t;
        }
        if let Some(w) = self.workers {
            cfg.campaign.workers = w;
        }
        if let Some(o) = &self.out {
            cfg.campaign.out = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::GenEnv { common } => {
            let cfg = common.config()?;
            let env = cfg.scenario.env(cfg.campaign.seed)?;
            let map = env.belief_map()?;
            let dir = &cfg.campaign.out;
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            std::fs::write(dir.join("env.json"), serde_json::to_string_pretty(&env)?)?;
            map.save(dir.join("map.json"))?;
            println!(
                "seed {}: {} clusters, {} cells, prior entropy {:.1} bits -> {}",
                env.seed,
                env.clusters.len(),
                map.len(),
                map.total_entropy(),
                dir.display()
            );
        }
        Command::Run { common } => {
            let cfg = common.config()?;
            let runs = run_campaign(&cfg)?;
            write_campaign(&cfg.campaign.out, &cfg, &runs)?;
            let records: Vec<_> = runs.into_iter().map(|r| r.record).collect();
            print!("{}", report(&records).1);
            let failed = records.iter().filter(|r| !r.ok).count();
            if failed > 0 {
                eprintln!("{failed} run(s) failed; see the error column of runs.csv");
            }
        }
        Command::Sweep { common } => {
            let cfg = common.config()?;
            let rows = run_sweep(&cfg)?;
            write_csv(&cfg.campaign.out.join("sweep.csv"), &Header::new("sweep", &cfg), &rows)?;
            for r in &rows {
                println!(
                    "extend {:>5} near {:>5} prune {:>5}: {:.2} +- {:.2} (n {}, failed {})",
                    r.extend_distance, r.near_radius, r.prune_radius, r.mean, r.ci95, r.n, r.failed
                );
            }
        }
        Command::Ablate { which, common } => {
            let cfg = common.config()?;
            let names: Vec<&str> = if which == "all" {
                vec!["recycle", "embedding", "horizon", "priority"]
            } else {
                vec![which.as_str()]
            };
            for name in names {
                println!("[{name}]");
                print!("{}", ablation::run_and_write(&cfg, name, &cfg.campaign.out)?);
            }
        }
        Command::Report { dir } => {
            let records = read_csv(&dir.join("runs.csv"))?;
            let (summary, text) = report(&records);
            print!("{text}");
            let stored = dir.join("summary.csv");
            if stored.exists() {
                let old: Vec<SummaryRow> = read_csv(&stored)?;
                if format!("{old:?}") != format!("{summary:?}") {
                    bail!("summary.csv does not match the aggregate of runs.csv");
                }
            }
        }
    }
    Ok(())
}
