//! Evaluation: micro P/R/F1, closure-based TempEval scores, McNemar's test
//! and per-constraint ablation reports.

pub mod ablation;
pub mod closure;
pub mod mcnemar;
pub mod micro;
pub mod tempeval;

pub use ablation::{gap_report, render_gap_report, GapReport, GapRow};
pub use closure::{closure, ClosureOutcome, ClosureRules, Inconsistency, RelationGraph, RulesFile};
pub use mcnemar::{exact_two_sided, mcnemar, mcnemar_from_counts, McNemar};
pub use micro::{f1_score, micro_prf, render_breakdown, LabelScores, MicroReport};
pub use tempeval::{tempeval_counts, tempeval_prf, TempEvalCounts, TempEvalScore};

use crate::error::{Error, Result};
use crate::stats::check_alignment;
use crate::types::{Assignment, GoldLabel, Instance, LabelSet, NONE_LABEL};

/// Label names for evaluation: the inference labels followed by `none`.
pub fn evaluation_labels(labels: &LabelSet) -> Vec<String> {
    let mut names = labels.names().to_vec();
    names.push(NONE_LABEL.to_string());
    names
}

/// Flattens gold labels of a corpus, mapping non-event pairs to the trailing
/// `none` index of [`evaluation_labels`].
pub fn gold_vector(instances: &[Instance], labels: &LabelSet) -> Result<Vec<usize>> {
    let none = labels.len();
    let mut out = Vec::new();
    for inst in instances {
        for (i, pair) in inst.pairs.iter().enumerate() {
            match pair.gold {
                Some(GoldLabel::Relation(r)) => out.push(r),
                Some(GoldLabel::NonEvent) => out.push(none),
                None => {
                    return Err(Error::MissingGold {
                        doc_id: inst.doc_id.clone(),
                        pair: i,
                    })
                }
            }
        }
    }
    Ok(out)
}

pub fn flatten(assignments: &[Assignment]) -> Vec<usize> {
    assignments.iter().flat_map(|a| a.labels.iter().copied()).collect()
}

/// Micro scores of assignments against corpus gold, `none` excluded.
pub fn corpus_micro(instances: &[Instance], assignments: &[Assignment], labels: &LabelSet) -> Result<MicroReport> {
    check_alignment(instances, assignments)?;
    let gold = gold_vector(instances, labels)?;
    let pred = flatten(assignments);
    micro_prf(&gold, &pred, &evaluation_labels(labels), Some(labels.len()))
}

/// Per-document gold graph and the system graph restricted to gold pairs.
/// Non-event gold pairs contribute to neither graph.
pub fn document_graphs(
    instance: &Instance,
    assignment: &Assignment,
    labels: &LabelSet,
) -> Result<(RelationGraph, RelationGraph)> {
    let mut gold = RelationGraph::new();
    let mut system = RelationGraph::new();
    for (pair, &pred) in instance.pairs.iter().zip(&assignment.labels) {
        let Some(r) = pair.gold_relation() else { continue };
        let (s, t) = (&pair.source.id, &pair.target.id);
        gold.add_edge(s.clone(), t.clone(), labels.name(r))?;
        system.add_edge(s.clone(), t.clone(), labels.name(pred))?;
    }
    Ok((gold, system))
}

/// TempEval tallies summed over documents.
pub fn corpus_tempeval(
    instances: &[Instance],
    assignments: &[Assignment],
    labels: &LabelSet,
    rules: &ClosureRules,
) -> Result<TempEvalScore> {
    check_alignment(instances, assignments)?;
    let mut counts = TempEvalCounts::default();
    for (inst, asg) in instances.iter().zip(assignments) {
        let (gold, system) = document_graphs(inst, asg, labels)?;
        counts += tempeval_counts(&gold, &system, rules);
    }
    Ok(counts.score())
}
