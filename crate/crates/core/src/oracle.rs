//! Exhaustive reference solvers for small instances.
//!
//! Both solvers enumerate every label vector in lexicographic order and keep
//! the first strict maximum, so ties resolve to the lexicographically
//! smallest assignment.

use crate::error::{Error, Result};
use crate::stats::Constraint;
use crate::types::{Assignment, Instance};

/// Largest number of assignments either solver will enumerate.
pub const MAX_ASSIGNMENTS: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub best_assignment: Assignment,
    pub best_objective: f64,
    /// Whether some assignment satisfied every constraint band. Always true
    /// for [`brute_lagrangian`].
    pub feasible: bool,
}

/// Number of assignments of `instance`, or a size error past the guard.
pub fn assignment_space(instance: &Instance) -> Result<u64> {
    let labels = num_labels(instance);
    let size = (labels as f64).powi(instance.pairs.len() as i32);
    if size > MAX_ASSIGNMENTS as f64 {
        return Err(Error::TooLarge {
            assignments: size,
            limit: MAX_ASSIGNMENTS,
        });
    }
    Ok(size as u64)
}

fn num_labels(instance: &Instance) -> usize {
    instance.pairs.first().map_or(1, |p| p.scores.len())
}

/// Raw objective `Σ y·S` of an assignment.
pub fn raw_objective(instance: &Instance, labels: &[usize]) -> f64 {
    instance.pairs.iter().zip(labels).map(|(p, &l)| p.scores[l]).sum()
}

/// `F(t) = (1 - p*) Σ y^r - p* Σ_{r' != r} y^{r'}` over the pairs matching `t`.
pub fn constraint_form(instance: &Instance, labels: &[usize], c: &Constraint) -> f64 {
    let mut on = 0.0;
    let mut off = 0.0;
    for (pair, &l) in instance.pairs.iter().zip(labels) {
        if !c.matches(pair) {
            continue;
        }
        if l == c.relation() {
            on += 1.0;
        } else {
            off += 1.0;
        }
    }
    (1.0 - c.p_star) * on - c.p_star * off
}

/// `L(y, λ) = Σ y·S + Σ λ_t F(t)` evaluated directly.
pub fn lagrangian_objective(instance: &Instance, labels: &[usize], constraints: &[Constraint], lambdas: &[f64]) -> f64 {
    let penalty: f64 = constraints
        .iter()
        .zip(lambdas)
        .map(|(c, &lam)| lam * constraint_form(instance, labels, c))
        .sum();
    raw_objective(instance, labels) + penalty
}

/// Whether every active constraint's share lies within `[p* - θ, p* + θ]`.
pub fn satisfies_bands(instance: &Instance, labels: &[usize], constraints: &[Constraint], default_theta: f64) -> bool {
    constraints.iter().all(|c| {
        let mut hit = 0usize;
        let mut total = 0usize;
        for (pair, &l) in instance.pairs.iter().zip(labels) {
            if c.matches(pair) {
                total += 1;
                hit += usize::from(l == c.relation());
            }
        }
        if total == 0 {
            return true;
        }
        let p_hat = hit as f64 / total as f64;
        (p_hat - c.p_star).abs() <= c.tolerance(default_theta)
    })
}

/// Which pairs each constraint covers, computed once per search.
struct Coverage<'a> {
    constraints: &'a [Constraint],
    covers: Vec<Vec<bool>>,
}

impl<'a> Coverage<'a> {
    fn new(instance: &Instance, constraints: &'a [Constraint]) -> Self {
        let covers = constraints
            .iter()
            .map(|c| instance.pairs.iter().map(|p| c.matches(p)).collect())
            .collect();
        Self { constraints, covers }
    }

    fn counts(&self, t: usize, labels: &[usize]) -> (usize, usize) {
        let r = self.constraints[t].relation();
        let mut hit = 0;
        let mut total = 0;
        for (&covered, &l) in self.covers[t].iter().zip(labels) {
            if covered {
                total += 1;
                hit += usize::from(l == r);
            }
        }
        (hit, total)
    }

    fn lagrangian(&self, instance: &Instance, labels: &[usize], lambdas: &[f64]) -> f64 {
        let penalty: f64 = (0..self.constraints.len())
            .map(|t| {
                let (hit, total) = self.counts(t, labels);
                let p = self.constraints[t].p_star;
                lambdas[t] * ((1.0 - p) * hit as f64 - p * (total - hit) as f64)
            })
            .sum();
        raw_objective(instance, labels) + penalty
    }

    fn within_bands(&self, labels: &[usize], default_theta: f64) -> bool {
        (0..self.constraints.len()).all(|t| {
            let (hit, total) = self.counts(t, labels);
            let c = &self.constraints[t];
            total == 0 || (hit as f64 / total as f64 - c.p_star).abs() <= c.tolerance(default_theta)
        })
    }
}

fn enumerate<F: FnMut(&[usize])>(instance: &Instance, mut visit: F) -> Result<()> {
    assignment_space(instance)?;
    let k = num_labels(instance);
    let n = instance.pairs.len();
    let mut labels = vec![0usize; n];
    loop {
        visit(&labels);
        // odometer increment, last position fastest
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(());
            }
            pos -= 1;
            labels[pos] += 1;
            if labels[pos] < k {
                break;
            }
            labels[pos] = 0;
        }
    }
}

/// Exhaustive maximization of the relaxed objective for fixed multipliers.
pub fn brute_lagrangian(instance: &Instance, constraints: &[Constraint], lambdas: &[f64]) -> Result<OracleResult> {
    if lambdas.len() != constraints.len() {
        return Err(Error::LengthMismatch {
            context: "multipliers".into(),
            expected: constraints.len(),
            found: lambdas.len(),
        });
    }
    let coverage = Coverage::new(instance, constraints);
    let mut best: Option<(Vec<usize>, f64)> = None;
    enumerate(instance, |labels| {
        let obj = coverage.lagrangian(instance, labels, lambdas);
        if best.as_ref().is_none_or(|(_, b)| obj > *b) {
            best = Some((labels.to_vec(), obj));
        }
    })?;
    let (labels, obj) = best.expect("at least one assignment");
    Ok(OracleResult {
        best_assignment: Assignment::new(labels),
        best_objective: obj,
        feasible: true,
    })
}

/// Exhaustive search for the best raw objective among assignments whose
/// shares satisfy every constraint band. When none does, returns the
/// unconstrained maximizer with `feasible = false`.
pub fn brute_constrained(instance: &Instance, constraints: &[Constraint], default_theta: f64) -> Result<OracleResult> {
    let mut best_feasible: Option<(Vec<usize>, f64)> = None;
    let mut best_any: Option<(Vec<usize>, f64)> = None;
    let coverage = Coverage::new(instance, constraints);
    enumerate(instance, |labels| {
        let obj = raw_objective(instance, labels);
        if best_any.as_ref().is_none_or(|(_, b)| obj > *b) {
            best_any = Some((labels.to_vec(), obj));
        }
        if coverage.within_bands(labels, default_theta) && best_feasible.as_ref().is_none_or(|(_, b)| obj > *b) {
            best_feasible = Some((labels.to_vec(), obj));
        }
    })?;
    let (labels, obj, feasible) = match best_feasible {
        Some((l, o)) => (l, o, true),
        None => {
            let (l, o) = best_any.expect("at least one assignment");
            (l, o, false)
        }
    };
    Ok(OracleResult {
        best_assignment: Assignment::new(labels),
        best_objective: obj,
        feasible,
    })
}
