//! Lagrangian-relaxation solver for MAP inference under distributional
//! constraints.
//!
//! Each constraint `t = (m, n, r)` with prior `p*` asks that the share of
//! `(m, n)` pairs labelled `r` equal `p*`. Written as a linear form over the
//! one-hot assignment,
//!
//! ```text
//! F(t) = (1 - p*) * #{matching pairs labelled r} - p* * #{matching pairs labelled r' != r}
//! ```
//!
//! and moved into the objective with a multiplier `λ_t`, the relaxed objective
//! `L(y, λ) = Σ y·S + Σ λ_t F(t)` is a sum of per-pair terms: label `r` of a
//! matching pair gains `λ_t (1 - p*)` and every other label loses `λ_t p*`.
//! The inner maximization is therefore an exact per-pair argmax over the
//! penalized scores, and the multipliers follow a decaying subgradient step
//! `λ_t += α_k (p* - p̂_t)` whenever the gap exceeds its tolerance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::Constraint;
use crate::types::{argmax, Assignment, Instance, PairCandidate};

/// Default iteration cap.
pub const DEFAULT_MAX_ITER: usize = 100;

/// Step size, decay and tolerance for the dual ascent.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperParams {
    alpha: f64,
    gamma: f64,
    theta_default: f64,
    max_iter: usize,
}

impl HyperParams {
    pub fn new(alpha: f64, gamma: f64, theta_default: f64, max_iter: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidHyperParams(format!("alpha {alpha} must be positive")));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidHyperParams(format!("gamma {gamma} must lie in (0, 1]")));
        }
        if !(theta_default > 0.0 && theta_default.is_finite()) {
            return Err(Error::InvalidHyperParams(format!(
                "theta {theta_default} must be positive"
            )));
        }
        if max_iter == 0 {
            return Err(Error::InvalidHyperParams("max_iter must be at least 1".into()));
        }
        Ok(Self {
            alpha,
            gamma,
            theta_default,
            max_iter,
        })
    }

    /// α = 5.0, γ = 0.7, θ = 0.05.
    pub fn timebank_dense() -> Self {
        Self::new(5.0, 0.7, 0.05, DEFAULT_MAX_ITER).expect("static hyper-parameters")
    }

    /// α = 5.0, γ = 0.8, θ = 0.02.
    pub fn i2b2() -> Self {
        Self::new(5.0, 0.8, 0.02, DEFAULT_MAX_ITER).expect("static hyper-parameters")
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn theta_default(&self) -> f64 {
        self.theta_default
    }

    pub fn max_iter(&self) -> usize {
        self.max_iter
    }

    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::new(self.alpha, self.gamma, theta, self.max_iter)
    }

    /// Step size used at iteration `k`: `alpha * gamma^k`.
    pub fn step_at(&self, iteration: usize) -> f64 {
        self.alpha * self.gamma.powi(iteration as i32)
    }
}

/// Whether one λ vector serves each document or the whole batch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    /// Gaps and multipliers are computed within each instance.
    #[default]
    PerDocument,
    /// Gaps aggregate over all pairs; one λ vector drives every instance.
    Corpus,
}

/// Dual variables plus the step-size schedule position.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierState {
    pub lambdas: Vec<f64>,
    pub current_alpha: f64,
    pub iteration: usize,
}

impl MultiplierState {
    /// All multipliers at zero, iteration 0.
    pub fn initial(num_constraints: usize, hyper: &HyperParams) -> Self {
        Self {
            lambdas: vec![0.0; num_constraints],
            current_alpha: hyper.step_at(0),
            iteration: 0,
        }
    }

    pub fn with_lambdas(lambdas: Vec<f64>, hyper: &HyperParams) -> Self {
        Self {
            lambdas,
            current_alpha: hyper.step_at(0),
            iteration: 0,
        }
    }
}

/// Raw scores plus `λ_t (1 - p*)` on the constrained label and `-λ_t p*` on
/// every other label, for each constraint matching the pair's types.
pub fn penalized_scores(pair: &PairCandidate, constraints: &[Constraint], state: &MultiplierState) -> Vec<f64> {
    let mut scores = pair.scores.clone();
    for (c, &lambda) in constraints.iter().zip(&state.lambdas) {
        if c.matches(pair) {
            apply_adjustment(&mut scores, c, lambda);
        }
    }
    scores
}

fn apply_adjustment(scores: &mut [f64], c: &Constraint, lambda: f64) {
    if lambda == 0.0 {
        return;
    }
    let on = lambda * (1.0 - c.p_star);
    let off = -lambda * c.p_star;
    for (label, s) in scores.iter_mut().enumerate() {
        *s += if label == c.relation() { on } else { off };
    }
}

/// Maximizes `L(y, λ)` for one instance by per-pair argmax of the penalized
/// scores. Returns the assignment and the achieved objective.
pub fn inner_map(instance: &Instance, constraints: &[Constraint], state: &MultiplierState) -> (Assignment, f64) {
    let mut labels = Vec::with_capacity(instance.pairs.len());
    let mut objective = 0.0;
    for pair in &instance.pairs {
        let scores = penalized_scores(pair, constraints, state);
        let best = argmax(&scores);
        objective += scores[best];
        labels.push(best);
    }
    (Assignment::new(labels), objective)
}

/// `λ_t += α_k Δ_t` for every constraint with `|Δ_t| > θ_t`, then advances the
/// schedule to `α_{k+1} = α γ^{k+1}`.
pub fn update_multipliers(
    state: &MultiplierState,
    constraints: &[Constraint],
    gaps: &[f64],
    hyper: &HyperParams,
) -> MultiplierState {
    let lambdas = state
        .lambdas
        .iter()
        .zip(constraints)
        .zip(gaps)
        .map(|((&lambda, c), &gap)| {
            if gap.abs() > c.tolerance(hyper.theta_default) {
                lambda + state.current_alpha * gap
            } else {
                lambda
            }
        })
        .collect();
    let iteration = state.iteration + 1;
    MultiplierState {
        lambdas,
        current_alpha: hyper.step_at(iteration),
        iteration,
    }
}

/// Predicted share `p̂_t` and gap `Δ_t = p* - p̂_t` of one constraint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintGap {
    /// `None` when no pair matches the constraint's types.
    pub p_hat: Option<f64>,
    pub matched: usize,
    pub gap: f64,
}

impl ConstraintGap {
    pub fn is_active(&self) -> bool {
        self.p_hat.is_some()
    }
}

/// Gaps of every constraint over a batch; inactive constraints get `Δ = 0`.
pub fn constraint_gaps(
    instances: &[Instance],
    assignments: &[Assignment],
    constraints: &[Constraint],
) -> Vec<ConstraintGap> {
    let mut hits = vec![0usize; constraints.len()];
    let mut totals = vec![0usize; constraints.len()];
    for (inst, asg) in instances.iter().zip(assignments) {
        for (pair, &label) in inst.pairs.iter().zip(&asg.labels) {
            for (k, c) in constraints.iter().enumerate() {
                if c.matches(pair) {
                    totals[k] += 1;
                    if label == c.relation() {
                        hits[k] += 1;
                    }
                }
            }
        }
    }
    constraints
        .iter()
        .enumerate()
        .map(|(k, c)| {
            if totals[k] == 0 {
                ConstraintGap {
                    p_hat: None,
                    matched: 0,
                    gap: 0.0,
                }
            } else {
                let p_hat = hits[k] as f64 / totals[k] as f64;
                ConstraintGap {
                    p_hat: Some(p_hat),
                    matched: totals[k],
                    gap: c.p_star - p_hat,
                }
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterReached,
}

/// One iteration of the ascent: gaps of the assignment found with `lambdas`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub gaps: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub objective: f64,
    pub step: f64,
}

/// The recorded trajectory of one solve.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveTrace {
    /// Document id under per-document scope; `None` for a corpus-wide solve.
    pub doc_id: Option<String>,
    pub records: Vec<IterationRecord>,
    pub status: SolveStatus,
}

impl SolveTrace {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    pub fn final_lambdas(&self) -> Option<&[f64]> {
        self.records.last().map(|r| r.lambdas.as_slice())
    }
}

/// Assignments for every instance plus one trace per solved batch.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub assignments: Vec<Assignment>,
    pub traces: Vec<SolveTrace>,
}

impl Solution {
    pub fn converged(&self) -> bool {
        self.traces.iter().all(SolveTrace::converged)
    }
}

/// Runs the dual ascent over `instances` under `scope`.
pub fn solve(
    instances: &[Instance],
    constraints: &[Constraint],
    hyper: &HyperParams,
    scope: Scope,
) -> Result<Solution> {
    check_dimensions(instances, constraints)?;
    match scope {
        Scope::Corpus => {
            let (assignments, trace) = solve_batch(instances, constraints, hyper, None);
            Ok(Solution {
                assignments,
                traces: vec![trace],
            })
        }
        Scope::PerDocument => {
            let results: Vec<(Vec<Assignment>, SolveTrace)> = instances
                .par_iter()
                .map(|inst| {
                    solve_batch(
                        std::slice::from_ref(inst),
                        constraints,
                        hyper,
                        Some(inst.doc_id.clone()),
                    )
                })
                .collect();
            let mut assignments = Vec::with_capacity(instances.len());
            let mut traces = Vec::with_capacity(instances.len());
            for (mut a, t) in results {
                assignments.append(&mut a);
                traces.push(t);
            }
            Ok(Solution { assignments, traces })
        }
    }
}

/// Solves a single instance with its own multipliers.
pub fn solve_instance(
    instance: &Instance,
    constraints: &[Constraint],
    hyper: &HyperParams,
) -> Result<(Assignment, SolveTrace)> {
    let mut sol = solve(std::slice::from_ref(instance), constraints, hyper, Scope::PerDocument)?;
    Ok((sol.assignments.remove(0), sol.traces.remove(0)))
}

fn check_dimensions(instances: &[Instance], constraints: &[Constraint]) -> Result<()> {
    for inst in instances {
        for (i, pair) in inst.pairs.iter().enumerate() {
            if pair.scores.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "document `{}`, pair {i}: empty score vector",
                    inst.doc_id
                )));
            }
            for c in constraints {
                if c.matches(pair) && c.relation() >= pair.scores.len() {
                    return Err(Error::InvalidConstraint(format!(
                        "relation index {} exceeds the {} scores of document `{}`, pair {i}",
                        c.relation(),
                        pair.scores.len(),
                        inst.doc_id
                    )));
                }
            }
        }
    }
    Ok(())
}

fn solve_batch(
    instances: &[Instance],
    constraints: &[Constraint],
    hyper: &HyperParams,
    doc_id: Option<String>,
) -> (Vec<Assignment>, SolveTrace) {
    let mut state = MultiplierState::initial(constraints.len(), hyper);
    let mut records = Vec::new();
    let mut assignments = Vec::new();
    let mut status = SolveStatus::MaxIterReached;

    for k in 0..hyper.max_iter {
        let mut objective = 0.0;
        assignments.clear();
        for inst in instances {
            let (a, obj) = inner_map(inst, constraints, &state);
            objective += obj;
            assignments.push(a);
        }
        let gaps: Vec<f64> = constraint_gaps(instances, &assignments, constraints)
            .into_iter()
            .map(|g| g.gap)
            .collect();
        records.push(IterationRecord {
            iter: k,
            gaps: gaps.clone(),
            lambdas: state.lambdas.clone(),
            objective,
            step: state.current_alpha,
        });
        let satisfied = constraints
            .iter()
            .zip(&gaps)
            .all(|(c, g)| g.abs() <= c.tolerance(hyper.theta_default));
        if satisfied {
            status = SolveStatus::Converged;
            break;
        }
        state = update_multipliers(&state, constraints, &gaps, hyper);
    }

    (
        assignments,
        SolveTrace {
            doc_id,
            records,
            status,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Triplet;
    use crate::types::{Event, GoldLabel};
    use approx::assert_abs_diff_eq;

    fn pair(m: &str, n: &str, scores: &[f64]) -> PairCandidate {
        PairCandidate::new(
            Event::new("a", m),
            Event::new("b", n),
            scores.to_vec(),
            Some(GoldLabel::Relation(0)),
        )
    }

    fn constraint(m: &str, n: &str, r: usize, p: f64) -> Constraint {
        Constraint::new(Triplet::new(m, n, r), p, None).unwrap()
    }

    #[test]
    fn hyper_validation() {
        assert!(HyperParams::new(0.0, 0.7, 0.05, 10).is_err());
        assert!(HyperParams::new(5.0, 0.0, 0.05, 10).is_err());
        assert!(HyperParams::new(5.0, 1.1, 0.05, 10).is_err());
        assert!(HyperParams::new(5.0, 0.7, 0.0, 10).is_err());
        assert!(HyperParams::new(5.0, 0.7, 0.05, 0).is_err());
        assert!(HyperParams::new(5.0, 1.0, 0.05, 1).is_ok());
        let i2b2 = HyperParams::i2b2();
        assert_eq!((i2b2.alpha(), i2b2.gamma(), i2b2.theta_default()), (5.0, 0.8, 0.02));
    }

    #[test]
    fn zero_multipliers_leave_scores_unchanged() {
        let p = pair("A", "B", &[0.3, 0.7]);
        let cs = [constraint("A", "B", 0, 0.4)];
        let state = MultiplierState::initial(1, &HyperParams::timebank_dense());
        assert_eq!(penalized_scores(&p, &cs, &state), vec![0.3, 0.7]);
    }

    #[test]
    fn single_constraint_adjustment() {
        let p = pair("A", "B", &[0.3, 0.7]);
        let cs = [constraint("A", "B", 0, 0.4)];
        let state = MultiplierState::with_lambdas(vec![1.0], &HyperParams::timebank_dense());
        let s = penalized_scores(&p, &cs, &state);
        assert_abs_diff_eq!(s[0], 0.9, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1], 0.3, epsilon = 1e-12);
    }

    #[test]
    fn non_matching_pair_unchanged() {
        let p = pair("C", "B", &[0.3, 0.7]);
        let cs = [constraint("A", "B", 0, 0.4)];
        let state = MultiplierState::with_lambdas(vec![2.0], &HyperParams::timebank_dense());
        assert_eq!(penalized_scores(&p, &cs, &state), vec![0.3, 0.7]);
    }

    #[test]
    fn empty_instance_inner_map() {
        let inst = Instance::new("d", vec![]);
        let (a, obj) = inner_map(&inst, &[], &MultiplierState::initial(0, &HyperParams::timebank_dense()));
        assert!(a.is_empty());
        assert_eq!(obj, 0.0);
    }

    #[test]
    fn update_rule_arithmetic() {
        let hyper = HyperParams::timebank_dense();
        let cs = [constraint("A", "B", 0, 0.3)];
        let state = MultiplierState::initial(1, &hyper);
        // p* = 0.3, p̂ = 0.5
        let next = update_multipliers(&state, &cs, &[0.3 - 0.5], &hyper);
        assert_abs_diff_eq!(next.lambdas[0], -1.0, epsilon = 1e-12);
        assert_eq!(next.iteration, 1);
        assert_abs_diff_eq!(next.current_alpha, 3.5, epsilon = 1e-12);

        let held = update_multipliers(&state, &cs, &[0.03], &hyper);
        assert_eq!(held.lambdas[0], 0.0);
    }

    #[test]
    fn step_schedule_decays_geometrically() {
        let hyper = HyperParams::timebank_dense();
        let mut state = MultiplierState::initial(0, &hyper);
        let mut steps = vec![state.current_alpha];
        for _ in 0..3 {
            state = update_multipliers(&state, &[], &[], &hyper);
            steps.push(state.current_alpha);
        }
        for (got, want) in steps.iter().zip([5.0, 3.5, 2.45, 1.715]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn satisfied_constraint_converges_immediately() {
        let inst = Instance::new("d", vec![pair("A", "B", &[0.6, 0.4]), pair("A", "B", &[0.2, 0.8])]);
        let cs = [constraint("A", "B", 0, 0.5)];
        let (a, trace) = solve_instance(&inst, &cs, &HyperParams::timebank_dense()).unwrap();
        assert!(trace.converged());
        assert_eq!(trace.records.len(), 1);
        assert_eq!(a, inst.baseline());
    }

    #[test]
    fn single_iteration_large_gap_hits_max_iter() {
        let inst = Instance::new("d", vec![pair("A", "B", &[0.9, 0.1]), pair("A", "B", &[0.8, 0.2])]);
        let cs = [constraint("A", "B", 0, 0.0)];
        let hyper = HyperParams::new(5.0, 0.7, 0.05, 1).unwrap();
        let (a, trace) = solve_instance(&inst, &cs, &hyper).unwrap();
        assert_eq!(trace.status, SolveStatus::MaxIterReached);
        assert_eq!(trace.records.len(), 1);
        assert_eq!(a, inst.baseline());
    }

    #[test]
    fn over_predicted_label_is_pushed_down() {
        let inst = Instance::new(
            "d",
            vec![
                pair("A", "B", &[0.6, 0.4]),
                pair("A", "B", &[0.55, 0.45]),
                pair("A", "B", &[0.9, 0.1]),
                pair("A", "B", &[0.8, 0.2]),
            ],
        );
        let cs = [constraint("A", "B", 0, 0.5)];
        let (a, trace) = solve_instance(&inst, &cs, &HyperParams::timebank_dense()).unwrap();
        assert!(trace.converged());
        assert_eq!(a.labels, vec![1, 1, 0, 0]);
        let first = trace.records.first().unwrap().gaps[0].abs();
        let last = trace.records.last().unwrap().gaps[0].abs();
        assert!(last < first);
    }

    #[test]
    fn inactive_constraint_never_blocks() {
        let inst = Instance::new("d", vec![pair("A", "B", &[0.6, 0.4])]);
        let cs = [constraint("X", "Y", 0, 0.0)];
        let (_, trace) = solve_instance(&inst, &cs, &HyperParams::timebank_dense()).unwrap();
        assert!(trace.converged());
        assert_eq!(trace.records[0].gaps, vec![0.0]);
    }

    #[test]
    fn relation_out_of_range_fails_fast() {
        let inst = Instance::new("d", vec![pair("A", "B", &[0.6, 0.4])]);
        let cs = [constraint("A", "B", 5, 0.2)];
        assert!(solve(&[inst], &cs, &HyperParams::timebank_dense(), Scope::Corpus).is_err());
    }

    #[test]
    fn corpus_scope_shares_multipliers() {
        let docs: Vec<Instance> = (0..3)
            .map(|i| {
                Instance::new(
                    format!("d{i}"),
                    vec![pair("A", "B", &[0.6, 0.4]), pair("A", "B", &[0.9, 0.1])],
                )
            })
            .collect();
        let cs = [constraint("A", "B", 0, 0.5)];
        let sol = solve(&docs, &cs, &HyperParams::timebank_dense(), Scope::Corpus).unwrap();
        assert_eq!(sol.traces.len(), 1);
        assert!(sol.converged());
        assert!(sol.traces[0].doc_id.is_none());
        for a in &sol.assignments {
            assert_eq!(a.labels, vec![1, 0]);
        }
        let per_doc = solve(&docs, &cs, &HyperParams::timebank_dense(), Scope::PerDocument).unwrap();
        assert_eq!(per_doc.traces.len(), 3);
    }
}
