use std::ops::AddAssign;

use serde::Serialize;

use super::closure::{closure, ClosureRules, RelationGraph};
use super::micro::f1_score;

/// Raw tallies behind a TempEval score; summed across documents for a
/// corpus-level figure.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TempEvalCounts {
    pub system_edges: usize,
    pub system_verified: usize,
    pub gold_edges: usize,
    pub gold_verified: usize,
}

impl AddAssign for TempEvalCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.system_edges += rhs.system_edges;
        self.system_verified += rhs.system_verified;
        self.gold_edges += rhs.gold_edges;
        self.gold_verified += rhs.gold_verified;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TempEvalScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when the system graph was empty and precision defaulted to 0.
    pub empty_system: bool,
    /// Set when the gold graph was empty and recall defaulted to 0.
    pub empty_gold: bool,
    pub counts: TempEvalCounts,
}

impl TempEvalCounts {
    pub fn score(&self) -> TempEvalScore {
        let empty_system = self.system_edges == 0;
        let empty_gold = self.gold_edges == 0;
        let precision = if empty_system {
            0.0
        } else {
            self.system_verified as f64 / self.system_edges as f64
        };
        let recall = if empty_gold {
            0.0
        } else {
            self.gold_verified as f64 / self.gold_edges as f64
        };
        TempEvalScore {
            precision,
            recall,
            f1: f1_score(precision, recall),
            empty_system,
            empty_gold,
            counts: *self,
        }
    }
}

/// Whether `closed` entails `(source, target, label)` directly or through the
/// inverse edge.
fn verifiable(closed: &RelationGraph, rules: &ClosureRules, source: &str, target: &str, label: &str) -> bool {
    closed.contains(source, target, label)
        || rules
            .inverse(label)
            .is_some_and(|inv| closed.contains(target, source, inv))
}

/// Closure-based tallies for one pair of graphs.
pub fn tempeval_counts(gold: &RelationGraph, system: &RelationGraph, rules: &ClosureRules) -> TempEvalCounts {
    let gold_closed = closure(gold, rules).graph;
    let system_closed = closure(system, rules).graph;
    let system_verified = system
        .edges()
        .filter(|(s, t, l)| verifiable(&gold_closed, rules, s, t, l))
        .count();
    let gold_verified = gold
        .edges()
        .filter(|(s, t, l)| verifiable(&system_closed, rules, s, t, l))
        .count();
    TempEvalCounts {
        system_edges: system.len(),
        system_verified,
        gold_edges: gold.len(),
        gold_verified,
    }
}

/// Precision is the share of system edges entailed by the gold closure;
/// recall the share of gold edges entailed by the system closure.
pub fn tempeval_prf(gold: &RelationGraph, system: &RelationGraph, rules: &ClosureRules) -> TempEvalScore {
    tempeval_counts(gold, system, rules).score()
}
