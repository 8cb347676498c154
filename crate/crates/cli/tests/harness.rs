//! Experiment harness: command line, output files and ablation trends.

use std::path::Path;
use std::process::Command;

use ipp_cli::ablation::{priority_time, recycle, run_and_write, seen_before_fraction, ReplanArm};
use ipp_cli::campaign::{summarize_runs, RunRecord, SummaryRow};
use ipp_cli::output::read_csv;
use ipp_cli::sweep::run_sweep;
use ipp_cli::{HarnessConfig, PlannerKind};

fn ipp(args: &[&str], dir: &Path) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_ipp")).args(args).arg("--out").arg(dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn run_writes_reproducible_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ipp(&["run", "--seed", "3", "--trials", "3", "--planners", "ia-tigris,random", "--budget", "1500"], dir.path());
    assert!(stdout.contains("ia-tigris"));
    let runs: Vec<RunRecord> = read_csv(&dir.path().join("runs.csv")).unwrap();
    assert_eq!(runs.len(), 6);
    assert!(runs.iter().all(|r| r.ok && r.budget == 1500.0));
    assert_eq!(runs.iter().map(|r| r.env_seed).filter(|&s| s == 3).count(), 2);
    let stored: Vec<SummaryRow> = read_csv(&dir.path().join("summary.csv")).unwrap();
    assert_eq!(stored, summarize_runs(&runs));
    for name in ["runs.csv", "summary.csv", "curve.csv", "cycles.csv", "traces/ia-tigris_b1500_t2.csv"] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(text.starts_with("# ipp run\n# config: {"), "{name}");
        assert!(text.contains("environment seed 3 + t"), "{name}");
    }
    let out = Command::new(env!("CARGO_BIN_EXE_ipp")).arg("report").arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn report_rejects_a_tampered_summary() {
    let dir = tempfile::tempdir().unwrap();
    ipp(&["run", "--trials", "2", "--planners", "coverage"], dir.path());
    let path = dir.path().join("summary.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let last = text.lines().last().unwrap().to_string();
    let mut fields: Vec<&str> = last.split(',').collect();
    let mean = format!("{}", fields[4].parse::<f64>().unwrap() + 1.0);
    fields[4] = &mean;
    std::fs::write(&path, text.replace(&last, &fields.join(","))).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ipp")).arg("report").arg(dir.path()).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn gen_env_writes_a_loadable_map() {
    let dir = tempfile::tempdir().unwrap();
    ipp(&["gen-env", "--seed", "11"], dir.path());
    let map = ipp_core::BeliefMap::load(dir.path().join("map.json")).unwrap();
    let d = ipp_core::DeskScenario::default();
    let expected = d.env(11).unwrap().belief_map().unwrap();
    assert_eq!((map.n_rows(), map.n_cols()), (expected.n_rows(), expected.n_cols()));
    for (a, b) in map.probabilities().iter().zip(expected.probabilities()) {
        assert!((a - b).abs() <= 1e-9);
    }
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[campaign]\ntrials = 1\nplanners = [\"greedy\"]\n[scenario]\nbudget = 800.0\n").unwrap();
    ipp(&["run", "--config", cfg.to_str().unwrap(), "--trials", "2"], dir.path());
    let runs: Vec<RunRecord> = read_csv(&dir.path().join("runs.csv")).unwrap();
    assert_eq!(runs.len(), 2);
    assert!(runs.iter().all(|r| r.planner == PlannerKind::Greedy && r.budget == 800.0));
}

#[test]
fn unknown_ablation_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_and_write(&HarnessConfig::default(), "lighting", dir.path()).is_err());
    let out = Command::new(env!("CARGO_BIN_EXE_ipp")).args(["run", "--planners", "rrt"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn sweep_grid_has_one_row_per_point() {
    let mut cfg = HarnessConfig::default();
    cfg.sweep.extend = vec![200.0, 300.0];
    cfg.sweep.near = vec![300.0];
    cfg.sweep.prune = vec![60.0, 120.0, 240.0];
    cfg.sweep.envs = 1;
    cfg.scenario.evaluations = 100;
    let rows = run_sweep(&cfg).unwrap();
    assert_eq!(rows.len(), 2 * 3);
    assert!(rows.iter().all(|r| r.n == 1 && r.failed == 0));
}

#[test]
fn near_radius_below_extend_distance_scores_lower() {
    let mut cfg = HarnessConfig::default();
    cfg.sweep.extend = vec![300.0];
    cfg.sweep.near = vec![75.0, 300.0];
    cfg.sweep.prune = vec![120.0];
    cfg.sweep.envs = 20;
    cfg.campaign.workers = 4;
    let rows = run_sweep(&cfg).unwrap();
    assert!(rows[0].mean < rows[1].mean, "{} >= {}", rows[0].mean, rows[1].mean);
}

#[test]
fn recycle_ablation_reports_three_arms() {
    let mut cfg = HarnessConfig::default();
    cfg.ablation.trials = 3;
    cfg.scenario.evaluations = 200;
    let a = recycle(&cfg).unwrap();
    assert_eq!(a.arms.iter().map(|x| x.0).collect::<Vec<_>>(), ReplanArm::ALL.to_vec());
    assert!(a.arms.iter().all(|(_, s)| s.n == 3 && s.mean.is_finite() && s.ci95.is_finite()));
    assert_eq!(a.rows.len(), 9);
}

#[test]
fn priority_and_decay_pull_the_path_toward_the_weighted_cluster() {
    let mut cfg = HarnessConfig::default();
    cfg.ablation.trials = 10;
    cfg.campaign.workers = 4;
    let rows = priority_time(&cfg).unwrap();
    let mean = |sc: &str, c: &str, f: fn(&ipp_cli::ablation::PriorityRow) -> f64| {
        let xs: Vec<f64> = rows.iter().filter(|r| r.scenario == sc && r.cluster == c).map(f).collect();
        xs.iter().sum::<f64>() / xs.len() as f64
    };
    let view = |r: &ipp_cli::ablation::PriorityRow| r.in_view;
    let first = |r: &ipp_cli::ablation::PriorityRow| if r.first_seen.is_nan() { 1e9 } else { r.first_seen };
    assert!(mean("priority", "far-left", view) > mean("equal", "far-left", view));
    assert!(mean("priority", "near-right", view) < mean("equal", "near-right", view));
    assert!(mean("priority-decay", "far-left", first) < mean("priority", "far-left", first));
    assert!(seen_before_fraction(&rows, "priority", "far-left", "near-right") > 0.5);
}
