use serde::Serialize;

use crate::error::Result;
use crate::lr::{constraint_gaps, solve, HyperParams, Scope};
use crate::stats::{check_alignment, Constraint};
use crate::types::{Assignment, Instance, LabelSet};

use super::corpus_micro;

/// Per-constraint ablation row. Gaps are `p̂ - p*`; an inactive constraint
/// reports zero gaps.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapRow {
    pub constraint: String,
    pub p_star: f64,
    pub p_hat_before: Option<f64>,
    pub p_hat_after: Option<f64>,
    pub gap_before: f64,
    pub gap_after: f64,
    /// `|gap_before| - |gap_after|`.
    pub shrinkage: f64,
    /// Full-set F1 minus F1 with this constraint left out and the rest re-solved.
    pub f1_contribution: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapReport {
    pub method: &'static str,
    pub baseline_f1: f64,
    pub inferred_f1: f64,
    pub combined_improvement: f64,
    pub rows: Vec<GapRow>,
}

/// Probability-gap shrinkage and leave-one-out F1 contribution of each
/// constraint. F1 is micro-averaged against gold with non-event pairs
/// excluded.
#[allow(clippy::too_many_arguments)]
pub fn gap_report(
    instances: &[Instance],
    labels: &LabelSet,
    constraints: &[Constraint],
    baseline: &[Assignment],
    inferred: &[Assignment],
    hyper: &HyperParams,
    scope: Scope,
) -> Result<GapReport> {
    check_alignment(instances, baseline)?;
    check_alignment(instances, inferred)?;
    let before = constraint_gaps(instances, baseline, constraints);
    let after = constraint_gaps(instances, inferred, constraints);
    let baseline_f1 = corpus_micro(instances, baseline, labels)?.f1;
    let inferred_f1 = corpus_micro(instances, inferred, labels)?.f1;

    let mut rows = Vec::with_capacity(constraints.len());
    for (k, c) in constraints.iter().enumerate() {
        let gap_of = |p: Option<f64>| p.map_or(0.0, |p| p - c.p_star);
        let gap_before = gap_of(before[k].p_hat);
        let gap_after = gap_of(after[k].p_hat);
        let rest: Vec<Constraint> = constraints
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .map(|(_, c)| c.clone())
            .collect();
        let without = solve(instances, &rest, hyper, scope)?;
        let without_f1 = corpus_micro(instances, &without.assignments, labels)?.f1;
        rows.push(GapRow {
            constraint: c.triplet.describe(labels),
            p_star: c.p_star,
            p_hat_before: before[k].p_hat,
            p_hat_after: after[k].p_hat,
            gap_before,
            gap_after,
            shrinkage: gap_before.abs() - gap_after.abs(),
            f1_contribution: inferred_f1 - without_f1,
        });
    }
    Ok(GapReport {
        method: "leave-one-out",
        baseline_f1,
        inferred_f1,
        combined_improvement: inferred_f1 - baseline_f1,
        rows,
    })
}

pub fn render_gap_report(report: &GapReport) -> String {
    let width = report
        .rows
        .iter()
        .map(|r| r.constraint.len())
        .max()
        .unwrap_or(0)
        .max("constraint".len());
    let mut out = format!(
        "{:<width$} {:>8} {:>10} {:>10} {:>9} {:>8}\n",
        "constraint", "p*", "gap before", "gap after", "shrink", "F1 (+)"
    );
    for r in &report.rows {
        out.push_str(&format!(
            "{:<width$} {:>8.3} {:>10.3} {:>10.3} {:>9.3} {:>+7.2}%\n",
            r.constraint,
            r.p_star,
            r.gap_before,
            r.gap_after,
            r.shrinkage,
            100.0 * r.f1_contribution
        ));
    }
    out.push_str(&format!(
        "combined F1 improvement ({}): {:+.2}%\n",
        report.method,
        100.0 * report.combined_improvement
    ));
    out
}
