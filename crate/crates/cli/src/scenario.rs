//! Built-in planted-bias generator spec used by `pipeline` when no spec file
//! is given.

use temprel::synth::{ConditionalDistribution, GeneratorSpec, ScoreModel, TypeWeight};
use temprel::LabelSet;

/// Relation distributions per type pair over
/// before, after, includes, is_included, simultaneous, vague.
const CONDITIONALS: [(&str, &str, [f64; 6]); 4] = [
    ("occurrence", "occurrence", [0.22, 0.18, 0.05, 0.05, 0.05, 0.45]),
    ("occurrence", "reporting", [0.15, 0.10, 0.30, 0.05, 0.05, 0.35]),
    ("reporting", "occurrence", [0.30, 0.10, 0.05, 0.20, 0.05, 0.30]),
    ("reporting", "reporting", [0.25, 0.25, 0.05, 0.05, 0.05, 0.35]),
];

/// Seeded spec over the six-label set whose scores over-predict `vague`.
/// `dominant_bias` sets how strongly.
pub fn planted_spec(seed: u64, num_instances: usize, pairs_per_instance: usize, dominant_bias: f64) -> GeneratorSpec {
    GeneratorSpec {
        seed,
        label_set: LabelSet::timebank_dense().names().to_vec(),
        num_instances,
        pairs_per_instance: [pairs_per_instance, pairs_per_instance],
        type_vocab: [("occurrence", 0.6), ("reporting", 0.4)]
            .iter()
            .map(|&(name, weight)| TypeWeight {
                name: name.into(),
                weight,
            })
            .collect(),
        conditional: CONDITIONALS
            .iter()
            .map(|(m, n, p)| ConditionalDistribution {
                source_type: (*m).into(),
                target_type: (*n).into(),
                probs: p.to_vec(),
            })
            .collect(),
        default_distribution: None,
        score_model: ScoreModel {
            correct_mass: 0.3,
            dominant_bias,
            dominant_label: "vague".into(),
            concentration: 1.0,
        },
    }
}
