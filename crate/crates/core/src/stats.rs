//! Triplet statistics over corpora: counts of `(source type, target type,
//! relation)` and of type pairs, priors derived from them, and the share-based
//! candidate ranking used before constraint selection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{argmax_label, Assignment, Instance, LabelSet, PairCandidate};

/// An ordered `(source type, target type)` key.
pub type TypePair = (String, String);

/// A `(source type, target type, relation)` triple.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triplet {
    pub source_type: String,
    pub target_type: String,
    pub relation: usize,
}

impl Triplet {
    pub fn new(source_type: impl Into<String>, target_type: impl Into<String>, relation: usize) -> Self {
        Self {
            source_type: source_type.into(),
            target_type: target_type.into(),
            relation,
        }
    }

    pub fn type_pair(&self) -> TypePair {
        (self.source_type.clone(), self.target_type.clone())
    }

    pub fn matches(&self, pair: &PairCandidate) -> bool {
        pair.source.event_type == self.source_type && pair.target.event_type == self.target_type
    }

    pub fn describe(&self, labels: &LabelSet) -> String {
        format!(
            "({}, {}, {})",
            self.source_type,
            self.target_type,
            labels.name(self.relation)
        )
    }
}

/// A distributional constraint: the predicted share of `triplet.relation`
/// among pairs of the triplet's type pattern must stay within `theta` of
/// `p_star`. A missing `theta` falls back to the solver's default tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub triplet: Triplet,
    pub p_star: f64,
    pub theta: Option<f64>,
}

impl Constraint {
    pub fn new(triplet: Triplet, p_star: f64, theta: Option<f64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_star) {
            return Err(Error::InvalidConstraint(format!("p_star {p_star} outside [0, 1]")));
        }
        if let Some(t) = theta {
            if t.is_nan() || t <= 0.0 {
                return Err(Error::InvalidConstraint(format!("theta {t} must be positive")));
            }
        }
        Ok(Self { triplet, p_star, theta })
    }

    pub fn relation(&self) -> usize {
        self.triplet.relation
    }

    pub fn matches(&self, pair: &PairCandidate) -> bool {
        self.triplet.matches(pair)
    }

    pub fn tolerance(&self, default_theta: f64) -> f64 {
        self.theta.unwrap_or(default_theta)
    }
}

/// Which label each pair contributes when counting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelSource {
    Gold,
    /// Unconstrained argmax of the score vector.
    Predicted,
}

/// Counts `C(m, n)` and `C(m, n, r)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TripletCounts {
    pub pair_counts: BTreeMap<TypePair, u64>,
    pub triplet_counts: BTreeMap<Triplet, u64>,
}

impl TripletCounts {
    pub fn is_empty(&self) -> bool {
        self.pair_counts.is_empty()
    }

    pub fn total_pairs(&self) -> u64 {
        self.pair_counts.values().sum()
    }

    pub fn pair_count(&self, source_type: &str, target_type: &str) -> u64 {
        self.pair_counts
            .get(&(source_type.to_string(), target_type.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn triplet_count(&self, triplet: &Triplet) -> u64 {
        self.triplet_counts.get(triplet).copied().unwrap_or(0)
    }

    fn add(&mut self, pair: &PairCandidate, relation: usize) {
        let (m, n) = pair.type_pair();
        *self.pair_counts.entry((m.to_string(), n.to_string())).or_insert(0) += 1;
        *self.triplet_counts.entry(Triplet::new(m, n, relation)).or_insert(0) += 1;
    }
}

/// Tallies type pairs and triplets. Under [`LabelSource::Gold`], non-event
/// pairs are skipped and a missing gold label is an error.
pub fn count_triplets(instances: &[Instance], source: LabelSource) -> Result<TripletCounts> {
    let mut counts = TripletCounts::default();
    for inst in instances {
        for (i, pair) in inst.pairs.iter().enumerate() {
            let relation = match source {
                LabelSource::Predicted => argmax_label(pair),
                LabelSource::Gold => match pair.gold {
                    None => {
                        return Err(Error::MissingGold {
                            doc_id: inst.doc_id.clone(),
                            pair: i,
                        })
                    }
                    Some(g) => match g.relation() {
                        Some(r) => r,
                        None => continue,
                    },
                },
            };
            counts.add(pair, relation);
        }
    }
    Ok(counts)
}

/// Tallies under explicit assignments (one per instance).
pub fn count_assigned(instances: &[Instance], assignments: &[Assignment]) -> Result<TripletCounts> {
    check_alignment(instances, assignments)?;
    let mut counts = TripletCounts::default();
    for (inst, asg) in instances.iter().zip(assignments) {
        for (pair, &label) in inst.pairs.iter().zip(&asg.labels) {
            counts.add(pair, label);
        }
    }
    Ok(counts)
}

pub(crate) fn check_alignment(instances: &[Instance], assignments: &[Assignment]) -> Result<()> {
    if instances.len() != assignments.len() {
        return Err(Error::LengthMismatch {
            context: "assignments per corpus".into(),
            expected: instances.len(),
            found: assignments.len(),
        });
    }
    for (inst, asg) in instances.iter().zip(assignments) {
        if inst.pairs.len() != asg.labels.len() {
            return Err(Error::LengthMismatch {
                context: format!("assignment for `{}`", inst.doc_id),
                expected: inst.pairs.len(),
                found: asg.labels.len(),
            });
        }
    }
    Ok(())
}

/// `p*_t = C(m, n, r) / C(m, n)`. Errors when the type pair never occurs.
pub fn prior_probability(counts: &TripletCounts, triplet: &Triplet) -> Result<f64> {
    let total = counts.pair_count(&triplet.source_type, &triplet.target_type);
    if total == 0 {
        return Err(Error::UndefinedPrior {
            source_type: triplet.source_type.clone(),
            target_type: triplet.target_type.clone(),
        });
    }
    Ok(counts.triplet_count(triplet) as f64 / total as f64)
}

/// Share of matching pairs assigned the triplet's relation, or `None` when no
/// pair matches the type pattern.
pub fn empirical_probability(
    instances: &[Instance],
    assignments: &[Assignment],
    triplet: &Triplet,
) -> Result<Option<f64>> {
    check_alignment(instances, assignments)?;
    let mut hit = 0u64;
    let mut total = 0u64;
    for (inst, asg) in instances.iter().zip(assignments) {
        for (pair, &label) in inst.pairs.iter().zip(&asg.labels) {
            if triplet.matches(pair) {
                total += 1;
                if label == triplet.relation {
                    hit += 1;
                }
            }
        }
    }
    Ok((total > 0).then(|| hit as f64 / total as f64))
}

/// A type pair that passed the share threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedPair {
    pub source_type: String,
    pub target_type: String,
    pub count: u64,
    pub share: f64,
}

impl RankedPair {
    pub fn type_pair(&self) -> TypePair {
        (self.source_type.clone(), self.target_type.clone())
    }
}

/// Every type pair in `counts`, sorted by count descending then by type names.
pub fn rank_type_pairs(counts: &TripletCounts, eval_pair_total: u64) -> Vec<RankedPair> {
    let mut ranked: Vec<RankedPair> = counts
        .pair_counts
        .iter()
        .map(|((m, n), &count)| RankedPair {
            source_type: m.clone(),
            target_type: n.clone(),
            count,
            share: if eval_pair_total == 0 {
                0.0
            } else {
                count as f64 / eval_pair_total as f64
            },
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then_with(|| a.source_type.cmp(&b.source_type))
            .then_with(|| a.target_type.cmp(&b.target_type))
    });
    ranked
}

/// Type pairs whose share of `eval_pair_total` is at least `threshold`.
pub fn candidate_constraints_by_threshold(
    counts: &TripletCounts,
    eval_pair_total: u64,
    threshold: f64,
) -> Vec<RankedPair> {
    rank_type_pairs(counts, eval_pair_total)
        .into_iter()
        .filter(|p| eval_pair_total > 0 && p.share >= threshold)
        .collect()
}

/// One triplet per type pair, all carrying `default_relation`.
pub fn default_triplets<'a, I>(type_pairs: I, default_relation: usize) -> Vec<Triplet>
where
    I: IntoIterator<Item = &'a TypePair>,
{
    type_pairs
        .into_iter()
        .map(|(m, n)| Triplet::new(m.clone(), n.clone(), default_relation))
        .collect()
}
