//! Re-aggregation of `runs.csv` into tables and paired comparisons.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::campaign::{summarize_runs, RunRecord, SummaryRow};
use crate::config::PlannerKind;
use crate::stats::{paired_t, PairedTest};

/// IA-TIGRIS against one baseline at one budget, over trials where both ran.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub budget: f64,
    pub baseline: PlannerKind,
    pub pairs: usize,
    /// Relative margin of the means, percent of the baseline mean.
    pub margin_pct: f64,
    pub test: Option<PairedTest>,
}

fn paired(records: &[RunRecord], budget: f64, a: PlannerKind, b: PlannerKind) -> (Vec<f64>, Vec<f64>) {
    let by_trial = |k: PlannerKind| -> BTreeMap<usize, f64> {
        records
            .iter()
            .filter(|r| r.ok && r.planner == k && r.budget == budget)
            .map(|r| (r.trial, r.final_pct_reduction))
            .collect()
    };
    let (ma, mb) = (by_trial(a), by_trial(b));
    ma.iter().filter_map(|(t, x)| mb.get(t).map(|y| (*x, *y))).unzip()
}

pub fn comparisons(records: &[RunRecord]) -> Vec<Comparison> {
    let mut budgets: Vec<f64> = records.iter().map(|r| r.budget).collect();
    budgets.sort_by(f64::total_cmp);
    budgets.dedup();
    let mut out = Vec::new();
    for budget in budgets {
        for baseline in PlannerKind::ALL.into_iter().skip(1) {
            let (a, b) = paired(records, budget, PlannerKind::IaTigris, baseline);
            if a.is_empty() {
                continue;
            }
            let ma = a.iter().sum::<f64>() / a.len() as f64;
            let mb = b.iter().sum::<f64>() / b.len() as f64;
            out.push(Comparison {
                budget,
                baseline,
                pairs: a.len(),
                margin_pct: 100.0 * (ma - mb) / mb,
                test: paired_t(&a, &b),
            });
        }
    }
    out
}

/// Human-readable table of the summary and comparisons.
pub fn render(summary: &[SummaryRow], comps: &[Comparison]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<10} {:>8} {:>4} {:>6} {:>18}", "planner", "budget", "n", "failed", "reduction % (95%)");
    for r in summary {
        let _ = writeln!(
            s,
            "{:<10} {:>8} {:>4} {:>6} {:>9.2} +- {:<6.2}",
            r.planner.name(),
            r.budget,
            r.n,
            r.failed,
            r.mean,
            r.ci95
        );
    }
    if !comps.is_empty() {
        let _ = writeln!(s, "\nia-tigris vs baseline (paired t-test)");
        let _ = writeln!(s, "{:<10} {:>8} {:>5} {:>9} {:>9} {:>11}", "baseline", "budget", "pairs", "margin %", "t", "p(greater)");
        for c in comps {
            let (t, p) = c.test.map_or((f64::NAN, f64::NAN), |t| (t.t, t.p_greater));
            let _ = writeln!(
                s,
                "{:<10} {:>8} {:>5} {:>9.2} {:>9.3} {:>11.2e}",
                c.baseline.name(),
                c.budget,
                c.pairs,
                c.margin_pct,
                t,
                p
            );
        }
    }
    s
}

pub fn report(records: &[RunRecord]) -> (Vec<SummaryRow>, String) {
    let summary = summarize_runs(records);
    let text = render(&summary, &comparisons(records));
    (summary, text)
}
