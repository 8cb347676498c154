//! Grid sweep over extend distance, near radius and prune radius.

use anyhow::Result;
use ipp_core::IaTigris;
use serde::{Deserialize, Serialize};

use crate::campaign::{fly, parallel_map};
use crate::config::HarnessConfig;
use crate::stats::summarize;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub extend_distance: f64,
    pub near_radius: f64,
    pub prune_radius: f64,
    pub n: usize,
    pub failed: usize,
    pub mean: f64,
    pub ci95: f64,
}

/// Runs IA-TIGRIS at every grid point over the first `sweep.envs`
/// environments of the campaign seed, at the first configured budget.
pub fn run_sweep(cfg: &HarnessConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let budget = cfg.budgets()[0];
    let sw = &cfg.sweep;
    let mut points = Vec::new();
    for &e in &sw.extend {
        for &r in &sw.near {
            for &p in &sw.prune {
                points.push((e, r, p));
            }
        }
    }
    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|i| (0..sw.envs).map(move |t| (i, t))).collect();
    let results = parallel_map(&jobs, cfg.campaign.workers, |&(i, trial)| {
        let (e, r, p) = points[i];
        let seed = cfg.env_seed(trial);
        let mut pc = cfg.tigris_config(seed);
        pc.extend_distance = e;
        pc.near_radius = r;
        pc.prune_radius = p;
        let run = IaTigris::new(pc)
            .map_err(anyhow::Error::from)
            .and_then(|mut planner| fly(cfg, &mut planner, &cfg.sim, budget, seed));
        match run {
            Ok(rep) => Some(rep.summary.final_pct_reduction),
            Err(err) => {
                log::error!("sweep ({e}, {r}, {p}) trial {trial}: {err:#}");
                None
            }
        }
    });
    Ok(points
        .iter()
        .enumerate()
        .map(|(i, &(e, r, p))| {
            let xs: Vec<Option<f64>> = jobs
                .iter()
                .zip(&results)
                .filter(|((j, _), _)| *j == i)
                .map(|(_, x)| *x)
                .collect();
            let ok: Vec<f64> = xs.iter().flatten().copied().collect();
            let s = summarize(&ok);
            SweepRow {
                extend_distance: e,
                near_radius: r,
                prune_radius: p,
                n: s.n,
                failed: xs.len() - ok.len(),
                mean: s.mean,
                ci95: s.ci95,
            }
        })
        .collect())
}
