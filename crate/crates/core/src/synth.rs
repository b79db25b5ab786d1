//! Seeded synthetic corpora with planted type-conditional relation
//! distributions and score vectors biased toward a dominant label.
//!
//! Randomness comes from ChaCha8 seeded with `seed`. For each instance the
//! generator draws, in order: the pair count, one type per event, and for
//! each pair a gold label followed by one Gamma(concentration) noise draw per
//! label. Draws never depend on `correct_mass` or `dominant_bias`, so two
//! specs differing only in those see the same gold labels and noise.
//!
//! A pair's scores are
//! `(μ·onehot(gold) + β·onehot(dominant) + (1 - μ)·noise) / (1 + β)`
//! with `noise` the normalized Gamma draws.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{count_triplets, LabelSource, Triplet};
use crate::types::{Event, GoldLabel, Instance, LabelSet, PairCandidate};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeWeight {
    pub name: String,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionalDistribution {
    pub source_type: String,
    pub target_type: String,
    pub probs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreModel {
    /// Mass placed on the gold label, in (0, 1].
    pub correct_mass: f64,
    /// Extra mass added to the dominant label before renormalizing.
    pub dominant_bias: f64,
    pub dominant_label: String,
    /// Gamma shape of the per-label noise.
    pub concentration: f64,
}

/// Everything the generator needs; serialized as the synth spec file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub seed: u64,
    pub label_set: Vec<String>,
    pub num_instances: usize,
    /// Inclusive `[min, max]` pairs per instance.
    pub pairs_per_instance: [usize; 2],
    pub type_vocab: Vec<TypeWeight>,
    pub conditional: Vec<ConditionalDistribution>,
    /// Gold distribution for type pairs missing from `conditional`.
    #[serde(default)]
    pub default_distribution: Option<Vec<f64>>,
    pub score_model: ScoreModel,
}

const DIST_TOLERANCE: f64 = 1e-9;

fn check_distribution(probs: &[f64], labels: usize, what: &str) -> Result<()> {
    if probs.len() != labels {
        return Err(Error::InvalidSpec(format!(
            "{what}: {} probabilities for {labels} labels",
            probs.len()
        )));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidSpec(format!(
            "{what}: probabilities must be non-negative"
        )));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > DIST_TOLERANCE {
        return Err(Error::InvalidSpec(format!("{what}: probabilities sum to {sum}")));
    }
    Ok(())
}

impl GeneratorSpec {
    pub fn labels(&self) -> Result<LabelSet> {
        LabelSet::new(self.label_set.iter().cloned()).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let labels = self.labels()?;
        let [lo, hi] = self.pairs_per_instance;
        if lo == 0 || lo > hi {
            return Err(Error::InvalidSpec(format!(
                "pairs_per_instance [{lo}, {hi}] must satisfy 1 <= min <= max"
            )));
        }
        if self.type_vocab.is_empty() {
            return Err(Error::InvalidSpec("type_vocab is empty".into()));
        }
        for t in &self.type_vocab {
            if t.name.is_empty() || !t.weight.is_finite() || t.weight <= 0.0 {
                return Err(Error::InvalidSpec(format!(
                    "type `{}` needs a non-empty name and a positive weight",
                    t.name
                )));
            }
        }
        let mut seen = BTreeMap::new();
        for c in &self.conditional {
            check_distribution(
                &c.probs,
                labels.len(),
                &format!("conditional ({}, {})", c.source_type, c.target_type),
            )?;
            if seen
                .insert((c.source_type.clone(), c.target_type.clone()), ())
                .is_some()
            {
                return Err(Error::InvalidSpec(format!(
                    "duplicate conditional for ({}, {})",
                    c.source_type, c.target_type
                )));
            }
        }
        match &self.default_distribution {
            Some(d) => check_distribution(d, labels.len(), "default_distribution")?,
            None => {
                for m in &self.type_vocab {
                    for n in &self.type_vocab {
                        if !seen.contains_key(&(m.name.clone(), n.name.clone())) {
                            return Err(Error::InvalidSpec(format!(
                                "no distribution for ({}, {}) and no default",
                                m.name, n.name
                            )));
                        }
                    }
                }
            }
        }
        let sm = &self.score_model;
        if !(sm.correct_mass > 0.0 && sm.correct_mass <= 1.0) {
            return Err(Error::InvalidSpec(format!(
                "correct_mass {} must lie in (0, 1]",
                sm.correct_mass
            )));
        }
        if !sm.dominant_bias.is_finite() || sm.dominant_bias < 0.0 {
            return Err(Error::InvalidSpec(format!(
                "dominant_bias {} must be non-negative",
                sm.dominant_bias
            )));
        }
        if !sm.concentration.is_finite() || sm.concentration <= 0.0 {
            return Err(Error::InvalidSpec("concentration must be positive".into()));
        }
        labels
            .require(&sm.dominant_label)
            .map_err(|_| Error::InvalidSpec(format!("dominant label `{}` not in label set", sm.dominant_label)))?;
        Ok(())
    }

    fn distribution_for(&self, m: &str, n: &str) -> &[f64] {
        self.conditional
            .iter()
            .find(|c| c.source_type == m && c.target_type == n)
            .map(|c| c.probs.as_slice())
            .or(self.default_distribution.as_deref())
            .expect("validated spec covers every type pair")
    }
}

/// Generates `spec.num_instances` scored instances with gold labels.
pub fn generate(spec: &GeneratorSpec) -> Result<Vec<Instance>> {
    spec.validate()?;
    let labels = spec.labels()?;
    let k = labels.len();
    let dominant = labels.require(&spec.score_model.dominant_label)?;
    let mu = spec.score_model.correct_mass;
    let beta = spec.score_model.dominant_bias;

    let type_dist =
        WeightedIndex::new(spec.type_vocab.iter().map(|t| t.weight)).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let gamma = Gamma::new(spec.score_model.concentration, 1.0).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let mut gold_dists: BTreeMap<(usize, usize), WeightedIndex<f64>> = BTreeMap::new();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let [lo, hi] = spec.pairs_per_instance;
    let mut instances = Vec::with_capacity(spec.num_instances);
    for doc in 0..spec.num_instances {
        let n_pairs = rng.random_range(lo..=hi);
        // events form a chain: pair i links event i to event i + 1
        let types: Vec<usize> = (0..=n_pairs).map(|_| type_dist.sample(&mut rng)).collect();
        let mut pairs = Vec::with_capacity(n_pairs);
        for i in 0..n_pairs {
            let (m, n) = (types[i], types[i + 1]);
            let dist = match gold_dists.get(&(m, n)) {
                Some(d) => d,
                None => {
                    let probs = spec.distribution_for(&spec.type_vocab[m].name, &spec.type_vocab[n].name);
                    let d = WeightedIndex::new(probs.iter().copied()).map_err(|e| Error::InvalidSpec(e.to_string()))?;
                    gold_dists.entry((m, n)).or_insert(d)
                }
            };
            let gold = dist.sample(&mut rng);
            let noise: Vec<f64> = (0..k).map(|_| gamma.sample(&mut rng)).collect();
            let noise_sum: f64 = noise.iter().sum();
            let mut scores: Vec<f64> = noise
                .iter()
                .map(|x| {
                    if noise_sum > 0.0 {
                        (1.0 - mu) * x / noise_sum
                    } else {
                        (1.0 - mu) / k as f64
                    }
                })
                .collect();
            scores[gold] += mu;
            scores[dominant] += beta;
            let total: f64 = scores.iter().sum();
            for s in &mut scores {
                *s /= total;
            }
            pairs.push(PairCandidate::new(
                Event::new(format!("e{i}"), spec.type_vocab[m].name.clone()),
                Event::new(format!("e{}", i + 1), spec.type_vocab[n].name.clone()),
                scores,
                Some(GoldLabel::Relation(gold)),
            ));
        }
        instances.push(Instance::new(format!("doc{doc:04}"), pairs));
    }
    Ok(instances)
}

/// Gold share, predicted (argmax) share and their difference for one triplet.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlantedGap {
    pub triplet: Triplet,
    pub gold_share: f64,
    pub predicted_share: f64,
    pub gap: f64,
}

/// Exact per-triplet tallies of gold versus argmax shares, over every type
/// pair observed in gold and every label.
pub fn planted_gap(corpus: &[Instance], num_labels: usize) -> Result<Vec<PlantedGap>> {
    let gold = count_triplets(corpus, LabelSource::Gold)?;
    let pred = count_triplets(corpus, LabelSource::Predicted)?;
    let mut out = Vec::new();
    for ((m, n), &total) in &gold.pair_counts {
        let pred_total = pred.pair_count(m, n);
        for r in 0..num_labels {
            let t = Triplet::new(m.clone(), n.clone(), r);
            let gold_share = gold.triplet_count(&t) as f64 / total as f64;
            let predicted_share = if pred_total == 0 {
                0.0
            } else {
                pred.triplet_count(&t) as f64 / pred_total as f64
            };
            out.push(PlantedGap {
                triplet: t,
                gold_share,
                predicted_share,
                gap: predicted_share - gold_share,
            });
        }
    }
    Ok(out)
}

/// Overall share of `label` among gold labels and among argmax predictions.
pub fn label_shares(corpus: &[Instance], label: usize) -> (f64, f64) {
    let mut gold = 0usize;
    let mut pred = 0usize;
    let mut total = 0usize;
    for pair in corpus.iter().flat_map(|i| &i.pairs) {
        let Some(g) = pair.gold_relation() else { continue };
        total += 1;
        gold += usize::from(g == label);
        pred += usize::from(crate::types::argmax_label(pair) == label);
    }
    if total == 0 {
        return (0.0, 0.0);
    }
    (gold as f64 / total as f64, pred as f64 / total as f64)
}

/// Finds the smallest dominant bias (to within `1e-6`) whose corpus shows a
/// predicted-minus-gold share of the dominant label of at least
/// `target_gap`. The gap is non-decreasing in the bias because every random
/// draw is independent of it.
pub fn calibrate_bias(spec: &GeneratorSpec, target_gap: f64) -> Result<f64> {
    spec.validate()?;
    let labels = spec.labels()?;
    let dominant = labels.require(&spec.score_model.dominant_label)?;
    let gap_at = |beta: f64| -> Result<f64> {
        let mut s = spec.clone();
        s.score_model.dominant_bias = beta;
        let corpus = generate(&s)?;
        let (g, p) = label_shares(&corpus, dominant);
        Ok(p - g)
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    if gap_at(lo)? >= target_gap {
        return Ok(0.0);
    }
    while gap_at(hi)? < target_gap {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::InvalidSpec(format!(
                "no dominant bias reaches a share gap of {target_gap}"
            )));
        }
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if gap_at(mid)? >= target_gap {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
