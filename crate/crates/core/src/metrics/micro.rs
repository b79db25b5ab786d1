use serde::Serialize;

use crate::error::{Error, Result};

/// Per-label precision/recall/F1. Ratios are `None` when undefined
/// (no predictions for precision, no gold support for recall).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LabelScores {
    pub label: String,
    pub support: usize,
    pub predicted: usize,
    pub correct: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MicroReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub excluded: Option<String>,
    pub per_label: Vec<LabelScores>,
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Micro-averaged scores over aligned label vectors.
///
/// The excluded label earns no credit: precision counts only predictions of
/// other labels, recall only gold pairs with other labels. A gold pair that
/// is predicted as the excluded label is a miss.
pub fn micro_prf(
    gold: &[usize],
    predicted: &[usize],
    labels: &[String],
    exclude: Option<usize>,
) -> Result<MicroReport> {
    if gold.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            context: "gold vs predicted labels".into(),
            expected: gold.len(),
            found: predicted.len(),
        });
    }
    if let Some(&bad) = gold.iter().chain(predicted).find(|&&l| l >= labels.len()) {
        return Err(Error::InvalidInput(format!(
            "label index {bad} outside a {}-label space",
            labels.len()
        )));
    }

    let mut support = vec![0usize; labels.len()];
    let mut pred_count = vec![0usize; labels.len()];
    let mut correct = vec![0usize; labels.len()];
    for (&g, &p) in gold.iter().zip(predicted) {
        support[g] += 1;
        pred_count[p] += 1;
        if g == p {
            correct[g] += 1;
        }
    }

    let counted = |l: usize| Some(l) != exclude;
    let tp: usize = (0..labels.len()).filter(|&l| counted(l)).map(|l| correct[l]).sum();
    let pos_pred: usize = (0..labels.len()).filter(|&l| counted(l)).map(|l| pred_count[l]).sum();
    let pos_gold: usize = (0..labels.len()).filter(|&l| counted(l)).map(|l| support[l]).sum();
    let precision = ratio(tp, pos_pred).unwrap_or(0.0);
    let recall = ratio(tp, pos_gold).unwrap_or(0.0);

    let per_label = labels
        .iter()
        .enumerate()
        .filter(|(l, _)| counted(*l))
        .map(|(l, name)| {
            let p = ratio(correct[l], pred_count[l]);
            let r = ratio(correct[l], support[l]);
            LabelScores {
                label: name.clone(),
                support: support[l],
                predicted: pred_count[l],
                correct: correct[l],
                precision: p,
                recall: r,
                f1: match (p, r) {
                    (Some(p), Some(r)) => Some(f1_score(p, r)),
                    _ => None,
                },
            }
        })
        .collect();

    Ok(MicroReport {
        precision,
        recall,
        f1: f1_score(precision, recall),
        excluded: exclude.map(|l| labels[l].clone()),
        per_label,
    })
}

fn pct(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{:.1}", 100.0 * x),
        None => "-".into(),
    }
}

/// Aligned breakdown table: one row per label, P/R/F1 columns for each
/// system, and a closing micro-average row.
pub fn render_breakdown(systems: &[(&str, &MicroReport)]) -> String {
    let mut out = String::new();
    let label_w = systems
        .first()
        .map(|(_, r)| r.per_label.iter().map(|l| l.label.len()).max().unwrap_or(0))
        .unwrap_or(0)
        .max(5);
    out.push_str(&format!("{:<label_w$}", ""));
    for (name, _) in systems {
        out.push_str(&format!(" | {:^20}", name));
    }
    out.push('\n');
    out.push_str(&format!("{:<label_w$}", "label"));
    for _ in systems {
        out.push_str(&format!(" | {:>6} {:>6} {:>6}", "P", "R", "F1"));
    }
    out.push('\n');
    let rows = systems.first().map_or(0, |(_, r)| r.per_label.len());
    for i in 0..rows {
        let label = &systems[0].1.per_label[i].label;
        out.push_str(&format!("{label:<label_w$}"));
        for (_, r) in systems {
            let l = &r.per_label[i];
            let (p, rc, f) = if l.predicted == 0 {
                (None, None, None)
            } else {
                (l.precision, l.recall, l.f1)
            };
            out.push_str(&format!(" | {:>6} {:>6} {:>6}", pct(p), pct(rc), pct(f)));
        }
        out.push('\n');
    }
    out.push_str(&format!("{:<label_w$}", "avg"));
    for (_, r) in systems {
        out.push_str(&format!(
            " | {:>6} {:>6} {:>6}",
            pct(Some(r.precision)),
            pct(Some(r.recall)),
            pct(Some(r.f1))
        ));
    }
    out.push('\n');
    out
}
