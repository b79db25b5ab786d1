#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use temprel::{Constraint, Event, GoldLabel, Instance, PairCandidate, Triplet};

pub const TYPES: [&str; 3] = ["A", "B", "C"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Normalized random score vector of length `k`.
pub fn scores(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / sum).collect()
}

/// Chain-shaped instance with `n` pairs over `k` labels and random gold.
pub fn instance(rng: &mut impl Rng, doc_id: &str, n: usize, k: usize) -> Instance {
    let types: Vec<&str> = (0..=n).map(|_| TYPES[rng.random_range(0..2)]).collect();
    let pairs = (0..n)
        .map(|i| {
            PairCandidate::new(
                Event::new(format!("e{i}"), types[i]),
                Event::new(format!("e{}", i + 1), types[i + 1]),
                scores(rng, k),
                Some(GoldLabel::Relation(rng.random_range(0..k))),
            )
        })
        .collect();
    Instance::new(doc_id, pairs)
}

/// Random constraint on the two-type vocabulary with an arbitrary prior.
pub fn constraint(rng: &mut impl Rng, k: usize) -> Constraint {
    let t = Triplet::new(
        TYPES[rng.random_range(0..2)],
        TYPES[rng.random_range(0..2)],
        rng.random_range(0..k),
    );
    Constraint::new(t, rng.random_range(0.0..=1.0), None).unwrap()
}

/// A small random instance (1..=8 pairs, 2..=4 labels) with up to 3
/// constraints and multipliers in [-3, 3].
pub fn small_case(seed: u64) -> (Instance, Vec<Constraint>, Vec<f64>) {
    let mut r = rng(seed);
    let n = r.random_range(1..=8);
    let k = r.random_range(2..=4);
    let inst = instance(&mut r, "doc", n, k);
    let m = r.random_range(0..=3);
    let cs: Vec<Constraint> = (0..m).map(|_| constraint(&mut r, k)).collect();
    let lambdas = (0..m).map(|_| r.random_range(-3.0..=3.0)).collect();
    (inst, cs, lambdas)
}

/// Counts of matching pairs and pairs labelled with the constraint relation.
pub fn tally(inst: &Instance, labels: &[usize], c: &Constraint) -> (usize, usize) {
    let mut total = 0;
    let mut hit = 0;
    for (p, &l) in inst.pairs.iter().zip(labels) {
        if p.source.event_type == c.triplet.source_type && p.target.event_type == c.triplet.target_type {
            total += 1;
            if l == c.triplet.relation {
                hit += 1;
            }
        }
    }
    (hit, total)
}
