//! Constrained MAP inference for event temporal relations.
//!
//! Per-pair relation scores are adjusted so that the predicted frequency of
//! selected `(source type, target type, relation)` triplets matches priors
//! gathered from training data. The constrained problem is solved with
//! Lagrangian relaxation ([`lr`]) and certified on small instances against
//! exhaustive search ([`oracle`]).

pub mod error;
pub mod io;
pub mod lr;
pub mod metrics;
pub mod oracle;
pub mod select;
pub mod stats;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use lr::{solve, HyperParams, MultiplierState, Scope, Solution, SolveStatus, SolveTrace};
pub use stats::{Constraint, Triplet, TripletCounts};
pub use types::{argmax_label, Assignment, Event, GoldLabel, Instance, LabelSet, PairCandidate};
