//! Constraint selection: a greedy dev-F1 search over ranked candidates, and a
//! rule-based filter that keeps triplets whose prior is stable across train
//! splits while the dev predictions miss it by a wide margin.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lr::HyperParams;
use crate::stats::{
    count_triplets, empirical_probability, prior_probability, Constraint, LabelSource, Triplet, TripletCounts,
};
use crate::types::{Assignment, Instance};

/// Outcome of one candidate in the greedy pass.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GreedyStep {
    pub triplet: Triplet,
    /// Dev F1 with the candidate added; `None` when the candidate was skipped.
    pub f1: Option<f64>,
    pub accepted: bool,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GreedyOutcome {
    pub selected: Vec<Constraint>,
    pub baseline_f1: f64,
    pub best_f1: f64,
    pub steps: Vec<GreedyStep>,
}

/// Walks `candidates` in order and keeps each one whose addition does not
/// lower dev F1 below the best seen so far.
///
/// `evaluate` receives the tentative constraint set and returns dev F1.
/// `p_star` comes from `train_counts`; candidates whose type pair never
/// occurs there are skipped.
pub fn greedy_select<F>(
    candidates: &[Triplet],
    train_counts: &TripletCounts,
    hyper: &HyperParams,
    mut evaluate: F,
) -> Result<GreedyOutcome>
where
    F: FnMut(&[Constraint]) -> Result<f64>,
{
    let baseline_f1 = evaluate(&[])?;
    let mut best = baseline_f1;
    let mut selected: Vec<Constraint> = Vec::new();
    let mut steps = Vec::with_capacity(candidates.len());

    for triplet in candidates {
        let p_star = match prior_probability(train_counts, triplet) {
            Ok(p) => p,
            Err(Error::UndefinedPrior { .. }) => {
                steps.push(GreedyStep {
                    triplet: triplet.clone(),
                    f1: None,
                    accepted: false,
                    note: Some("type pair absent from training counts".into()),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let candidate = Constraint::new(triplet.clone(), p_star, Some(hyper.theta_default()))?;
        selected.push(candidate);
        let f1 = evaluate(&selected)?;
        let accepted = f1 >= best;
        if accepted {
            best = f1;
        } else {
            selected.pop();
        }
        steps.push(GreedyStep {
            triplet: triplet.clone(),
            f1: Some(f1),
            accepted,
            note: None,
        });
    }

    Ok(GreedyOutcome {
        selected,
        baseline_f1,
        best_f1: best,
        steps,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityOptions {
    pub splits: usize,
    /// Rule 1: mean |p_split - p*| must be strictly below this.
    pub stability_tol: f64,
    /// Rule 2: |p̂_dev - p*| must be strictly above this.
    pub gap_min: f64,
    pub seed: u64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            splits: 5,
            stability_tol: 0.001,
            gap_min: 0.1,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    /// Type pair absent from the full training set.
    NoPrior,
    /// Type pair absent from at least one split.
    MissingInSplit,
    Unstable,
    /// No dev pair matches the type pattern.
    InactiveOnDev,
    SmallGap,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub triplet: Triplet,
    pub p_star: Option<f64>,
    pub split_priors: Vec<Option<f64>>,
    pub mean_deviation: Option<f64>,
    pub dev_probability: Option<f64>,
    pub kept: bool,
    pub rejection: Option<Rejection>,
}

/// Seeded shuffle of instance indices into `splits` equal chunks; trailing
/// instances go round-robin.
pub fn split_indices(n: usize, splits: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let size = n / splits;
    let mut out: Vec<Vec<usize>> = order
        .chunks(size.max(1))
        .take(if size == 0 { 0 } else { splits })
        .map(<[usize]>::to_vec)
        .collect();
    out.resize(splits, Vec::new());
    for (k, &idx) in order[size * splits..].iter().enumerate() {
        out[k % splits].push(idx);
    }
    out
}

/// Applies both selection rules to every candidate.
pub fn stability_filter(
    train: &[Instance],
    candidates: &[Triplet],
    dev: &[Instance],
    dev_predictions: &[Assignment],
    options: &StabilityOptions,
) -> Result<Vec<StabilityVerdict>> {
    if train.is_empty() {
        return Err(Error::InvalidInput(
            "stability filter needs a non-empty training corpus".into(),
        ));
    }
    if options.splits == 0 {
        return Err(Error::InvalidInput("split count must be positive".into()));
    }
    let full = count_triplets(train, LabelSource::Gold)?;
    let split_counts: Vec<TripletCounts> = split_indices(train.len(), options.splits, options.seed)
        .into_iter()
        .map(|idx| {
            let subset: Vec<Instance> = idx.into_iter().map(|i| train[i].clone()).collect();
            count_triplets(&subset, LabelSource::Gold)
        })
        .collect::<Result<_>>()?;

    candidates
        .iter()
        .map(|t| {
            let mut verdict = StabilityVerdict {
                triplet: t.clone(),
                p_star: None,
                split_priors: Vec::new(),
                mean_deviation: None,
                dev_probability: None,
                kept: false,
                rejection: None,
            };
            let Ok(p_star) = prior_probability(&full, t) else {
                verdict.rejection = Some(Rejection::NoPrior);
                return Ok(verdict);
            };
            verdict.p_star = Some(p_star);
            verdict.split_priors = split_counts.iter().map(|c| prior_probability(c, t).ok()).collect();
            verdict.dev_probability = empirical_probability(dev, dev_predictions, t)?;

            if verdict.split_priors.iter().any(Option::is_none) {
                verdict.rejection = Some(Rejection::MissingInSplit);
                return Ok(verdict);
            }
            let mean = verdict
                .split_priors
                .iter()
                .map(|p| (p.unwrap() - p_star).abs())
                .sum::<f64>()
                / options.splits as f64;
            verdict.mean_deviation = Some(mean);
            if mean >= options.stability_tol {
                verdict.rejection = Some(Rejection::Unstable);
                return Ok(verdict);
            }
            match verdict.dev_probability {
                None => verdict.rejection = Some(Rejection::InactiveOnDev),
                Some(p_hat) if (p_hat - p_star).abs() > options.gap_min => verdict.kept = true,
                Some(_) => verdict.rejection = Some(Rejection::SmallGap),
            }
            Ok(verdict)
        })
        .collect()
}

/// Builds constraints from the kept verdicts.
pub fn kept_constraints(verdicts: &[StabilityVerdict], theta: f64) -> Result<Vec<Constraint>> {
    verdicts
        .iter()
        .filter(|v| v.kept)
        .map(|v| Constraint::new(v.triplet.clone(), v.p_star.expect("kept implies prior"), Some(theta)))
        .collect()
}
