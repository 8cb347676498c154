//! Paired multi-trial campaigns: every planner flies the same environments.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::Result;
use ipp_core::sim::CycleRecord;
use ipp_core::{run_mission, MissionReport, Planner, SimConfig, TraceRow};
use serde::{Deserialize, Serialize};

use crate::config::{HarnessConfig, PlannerKind};
use crate::output::{write_csv, Header};
use crate::stats::summarize;

/// Maps `f` over `items` on up to `workers` threads, keeping input order.
pub fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let out: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                out.lock().expect("result lock")[i] = Some(r);
            });
        }
    });
    out.into_inner()
        .expect("result lock")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

/// Flies `planner` over the environment of `env_seed`.
pub fn fly(
    cfg: &HarnessConfig,
    planner: &mut dyn Planner,
    sim: &SimConfig,
    budget: f64,
    env_seed: u64,
) -> Result<MissionReport> {
    let map = cfg.scenario.env(env_seed)?.belief_map()?;
    Ok(run_mission(&map, &cfg.setup(budget, env_seed), planner, sim)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub planner: PlannerKind,
    pub budget: f64,
    pub trial: usize,
}

/// One row of `runs.csv`. Failed runs keep their slot with `ok = false`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub planner: PlannerKind,
    pub budget: f64,
    pub trial: usize,
    pub env_seed: u64,
    pub ok: bool,
    pub final_pct_reduction: f64,
    pub path_length: f64,
    pub duration: f64,
    pub replans: usize,
    pub failures: usize,
    pub unmatched_merges: usize,
    pub loiters: usize,
    pub banking_secs: f64,
    pub max_plan_overrun: f64,
    pub error: String,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub record: RunRecord,
    pub trace: Vec<TraceRow>,
    pub cycles: Vec<CycleRecord>,
}

pub fn run_job(cfg: &HarnessConfig, job: &Job) -> RunOutput {
    let env_seed = cfg.env_seed(job.trial);
    let result = cfg
        .planner(job.planner, env_seed)
        .and_then(|mut p| fly(cfg, p.as_mut(), &cfg.sim, job.budget, env_seed));
    let mut record = RunRecord {
        planner: job.planner,
        budget: job.budget,
        trial: job.trial,
        env_seed,
        ok: false,
        final_pct_reduction: f64::NAN,
        path_length: f64::NAN,
        duration: f64::NAN,
        replans: 0,
        failures: 0,
        unmatched_merges: 0,
        loiters: 0,
        banking_secs: f64::NAN,
        max_plan_overrun: f64::NAN,
        error: String::new(),
    };
    match result {
        Ok(r) => {
            let s = r.summary;
            record.ok = true;
            record.final_pct_reduction = s.final_pct_reduction;
            record.path_length = s.path_length;
            record.duration = s.duration;
            record.replans = s.replans;
            record.failures = s.failures;
            record.unmatched_merges = s.unmatched_merges;
            record.loiters = s.loiters;
            record.banking_secs = s.banking_secs;
            record.max_plan_overrun = s.max_plan_overrun;
            RunOutput { record, trace: r.trace, cycles: s.cycles }
        }
        Err(e) => {
            log::error!("{} budget {} trial {}: {e:#}", job.planner, job.budget, job.trial);
            record.error = format!("{e:#}");
            RunOutput { record, trace: Vec::new(), cycles: Vec::new() }
        }
    }
}

pub fn jobs(cfg: &HarnessConfig) -> Vec<Job> {
    let mut out = Vec::new();
    for budget in cfg.budgets() {
        for trial in 0..cfg.campaign.trials {
            for &planner in &cfg.campaign.planners {
                out.push(Job { planner, budget, trial });
            }
        }
    }
    out
}

pub fn run_campaign(cfg: &HarnessConfig) -> Result<Vec<RunOutput>> {
    cfg.validate()?;
    let jobs = jobs(cfg);
    log::info!("{} missions on {} worker(s)", jobs.len(), cfg.campaign.workers);
    Ok(parallel_map(&jobs, cfg.campaign.workers, |j| run_job(cfg, j)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub planner: PlannerKind,
    pub budget: f64,
    pub n: usize,
    pub failed: usize,
    pub mean: f64,
    pub sd: f64,
    pub ci95: f64,
}

/// Final reduction per (planner, budget) over successful runs.
pub fn summarize_runs(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(PlannerKind, u64), (f64, Vec<f64>, usize)> = BTreeMap::new();
    for r in records {
        let g = groups.entry((r.planner, r.budget.to_bits())).or_insert((r.budget, Vec::new(), 0));
        if r.ok {
            g.1.push(r.final_pct_reduction);
        } else {
            g.2 += 1;
        }
    }
    let mut rows: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((planner, _), (budget, xs, failed))| {
            let s = summarize(&xs);
            SummaryRow { planner, budget, n: s.n, failed, mean: s.mean, sd: s.sd, ci95: s.ci95 }
        })
        .collect();
    rows.sort_by(|a, b| a.budget.total_cmp(&b.budget).then(a.planner.cmp(&b.planner)));
    rows
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub planner: PlannerKind,
    pub budget: f64,
    pub t: f64,
    pub n: usize,
    pub mean: f64,
    pub ci95: f64,
}

/// Mean entropy-reduction curve on a `step` grid; a finished mission holds
/// its final value.
pub fn mean_curves(runs: &[RunOutput], step: f64) -> Vec<CurveRow> {
    let mut groups: BTreeMap<(u64, PlannerKind), Vec<&[TraceRow]>> = BTreeMap::new();
    for r in runs.iter().filter(|r| r.record.ok && !r.trace.is_empty()) {
        groups.entry((r.record.budget.to_bits(), r.record.planner)).or_default().push(&r.trace);
    }
    let mut rows = Vec::new();
    for ((budget, planner), traces) in groups {
        let end = traces.iter().map(|t| t.last().map_or(0.0, |r| r.t)).fold(0.0, f64::max);
        let ticks = (end / step).ceil() as usize;
        let mut cursors = vec![0usize; traces.len()];
        for k in 0..=ticks {
            let t = k as f64 * step;
            let xs: Vec<f64> = traces
                .iter()
                .zip(cursors.iter_mut())
                .map(|(tr, c)| {
                    while *c + 1 < tr.len() && tr[*c + 1].t <= t + 1e-9 {
                        *c += 1;
                    }
                    tr[*c].pct_reduction
                })
                .collect();
            let s = summarize(&xs);
            rows.push(CurveRow { planner, budget: f64::from_bits(budget), t, n: s.n, mean: s.mean, ci95: s.ci95 });
        }
    }
    rows
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleRow {
    pub planner: PlannerKind,
    pub budget: f64,
    pub trial: usize,
    pub t: f64,
    pub tree_size: usize,
    pub iterations: usize,
    pub recycled: bool,
    pub plan_cost: f64,
    pub plan_info: f64,
    pub update_secs: Option<f64>,
    pub build_secs: Option<f64>,
}

fn cycle_rows(runs: &[RunOutput], timings: bool) -> Vec<CycleRow> {
    let mut rows = Vec::new();
    for r in runs {
        for c in &r.cycles {
            rows.push(CycleRow {
                planner: r.record.planner,
                budget: r.record.budget,
                trial: r.record.trial,
                t: c.t,
                tree_size: c.tree_size,
                iterations: c.iterations,
                recycled: c.recycled,
                plan_cost: c.plan_cost,
                plan_info: c.plan_info,
                update_secs: if timings { c.update_secs } else { None },
                build_secs: if timings { Some(c.build_secs) } else { None },
            });
        }
    }
    rows
}

/// Writes `runs.csv`, `summary.csv`, `curve.csv`, `cycles.csv` and one trace
/// per run under `traces/`. Wall-clock timings appear only in
/// non-deterministic campaigns, so deterministic outputs are reproducible.
pub fn write_campaign(dir: &Path, cfg: &HarnessConfig, runs: &[RunOutput]) -> Result<()> {
    let header = Header::new("run", cfg);
    let records: Vec<RunRecord> = runs.iter().map(|r| r.record.clone()).collect();
    write_csv(&dir.join("runs.csv"), &header, &records)?;
    write_csv(&dir.join("summary.csv"), &header, summarize_runs(&records))?;
    write_csv(&dir.join("curve.csv"), &header, mean_curves(runs, 1.0))?;
    write_csv(&dir.join("cycles.csv"), &header, cycle_rows(runs, !cfg.deterministic))?;
    for r in runs.iter().filter(|r| r.record.ok) {
        let name = format!("{}_b{}_t{}.csv", r.record.planner, r.record.budget, r.record.trial);
        write_csv(&dir.join("traces").join(name), &header, &r.trace)?;
    }
    Ok(())
}
