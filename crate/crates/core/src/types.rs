//! Domain types shared by every stage: label sets, typed events, scored
//! candidate pairs and the per-document instances inference runs over.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reserved gold label for pairs that involve a non-event.
pub const NONE_LABEL: &str = "none";

/// Tolerance on the sum of a pair's score vector.
pub const SCORE_SUM_TOLERANCE: f64 = 1e-6;

/// Ordered set of relation labels. Order fixes tie-breaking and serialization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelSet {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelSet {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidLabelSet("label set is empty".into()));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, name) in labels.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::InvalidLabelSet("empty label name".into()));
            }
            if name == NONE_LABEL {
                return Err(Error::InvalidLabelSet(format!(
                    "`{NONE_LABEL}` is reserved for non-event pairs"
                )));
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::InvalidLabelSet(format!("duplicate label `{name}`")));
            }
        }
        Ok(Self { labels, index })
    }

    /// The six TimeBank-Dense relations.
    pub fn timebank_dense() -> Self {
        Self::new(["before", "after", "includes", "is_included", "simultaneous", "vague"]).expect("static label set")
    }

    /// The three i2b2 relations.
    pub fn i2b2() -> Self {
        Self::new(["before", "after", "overlap"]).expect("static label set")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name).ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }

    pub fn name(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn names(&self) -> &[String] {
        &self.labels
    }
}

/// An event mention with its type property.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    pub id: String,
    pub event_type: String,
}

impl Event {
    pub fn new(id: impl Into<String>, event_type: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            event_type: event_type.into(),
        }
    }
}

/// Gold annotation of a candidate pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GoldLabel {
    Relation(usize),
    /// The pair involves a non-event; excluded from inference statistics.
    NonEvent,
}

impl GoldLabel {
    pub fn relation(self) -> Option<usize> {
        match self {
            GoldLabel::Relation(r) => Some(r),
            GoldLabel::NonEvent => None,
        }
    }
}

/// A scored candidate event pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PairCandidate {
    pub source: Event,
    pub target: Event,
    pub scores: Vec<f64>,
    pub gold: Option<GoldLabel>,
}

impl PairCandidate {
    pub fn new(source: Event, target: Event, scores: Vec<f64>, gold: Option<GoldLabel>) -> Self {
        Self {
            source,
            target,
            scores,
            gold,
        }
    }

    pub fn type_pair(&self) -> (&str, &str) {
        (&self.source.event_type, &self.target.event_type)
    }

    pub fn gold_relation(&self) -> Option<usize> {
        self.gold.and_then(GoldLabel::relation)
    }
}

/// Index of the highest score; ties go to the lowest label index.
pub fn argmax_label(pair: &PairCandidate) -> usize {
    argmax(&pair.scores)
}

pub(crate) fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// One document's candidate pairs: the unit of inference.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub doc_id: String,
    pub pairs: Vec<PairCandidate>,
}

impl Instance {
    pub fn new(doc_id: impl Into<String>, pairs: Vec<PairCandidate>) -> Self {
        Self {
            doc_id: doc_id.into(),
            pairs,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Unconstrained per-pair argmax.
    pub fn baseline(&self) -> Assignment {
        Assignment::new(self.pairs.iter().map(argmax_label).collect())
    }
}

/// One relation label per candidate pair of an instance.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Assignment {
    pub labels: Vec<usize>,
}

impl Assignment {
    pub fn new(labels: Vec<usize>) -> Self {
        Self { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Checks length and label range against an instance.
    pub fn check(&self, instance: &Instance, num_labels: usize) -> Result<()> {
        if self.labels.len() != instance.pairs.len() {
            return Err(Error::LengthMismatch {
                context: format!("assignment for `{}`", instance.doc_id),
                expected: instance.pairs.len(),
                found: self.labels.len(),
            });
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= num_labels) {
            return Err(Error::InvalidInput(format!(
                "assignment for `{}` uses label index {bad} outside a {num_labels}-label set",
                instance.doc_id
            )));
        }
        Ok(())
    }
}

/// A structural problem found by [`validate_instance`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub pair: Option<usize>,
    pub field: &'static str,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.pair {
            Some(p) => write!(f, "pair {p}, {}: {}", self.field, self.reason),
            None => write!(f, "{}: {}", self.field, self.reason),
        }
    }
}

/// Reports every type invariant an instance breaks. Never fails.
pub fn validate_instance(instance: &Instance, labels: &LabelSet) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen: HashMap<&str, &str> = HashMap::new();
    for (i, pair) in instance.pairs.iter().enumerate() {
        for (field, event) in [("source", &pair.source), ("target", &pair.target)] {
            if event.id.is_empty() {
                out.push(Violation {
                    pair: Some(i),
                    field,
                    reason: "empty event id".into(),
                });
            }
            if event.event_type.is_empty() {
                out.push(Violation {
                    pair: Some(i),
                    field,
                    reason: format!("event `{}` has an empty type", event.id),
                });
            }
            match seen.get(event.id.as_str()) {
                Some(&ty) if ty != event.event_type => out.push(Violation {
                    pair: Some(i),
                    field,
                    reason: format!(
                        "inconsistent event type for `{}`: `{}` vs `{}`",
                        event.id, ty, event.event_type
                    ),
                }),
                Some(_) => {}
                None => {
                    seen.insert(&event.id, &event.event_type);
                }
            }
        }

        if pair.scores.len() != labels.len() {
            out.push(Violation {
                pair: Some(i),
                field: "scores",
                reason: format!(
                    "score length {} does not match {} labels",
                    pair.scores.len(),
                    labels.len()
                ),
            });
        }
        if pair.scores.iter().any(|s| !s.is_finite() || *s < 0.0) {
            out.push(Violation {
                pair: Some(i),
                field: "scores",
                reason: "scores must be finite and non-negative".into(),
            });
        } else {
            let sum: f64 = pair.scores.iter().sum();
            if (sum - 1.0).abs() > SCORE_SUM_TOLERANCE {
                out.push(Violation {
                    pair: Some(i),
                    field: "scores",
                    reason: format!("scores sum to {sum}, expected 1"),
                });
            }
        }
        if let Some(GoldLabel::Relation(r)) = pair.gold {
            if r >= labels.len() {
                out.push(Violation {
                    pair: Some(i),
                    field: "gold",
                    reason: format!("gold label index {r} out of range"),
                });
            }
        }
    }
    out
}
