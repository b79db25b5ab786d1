//! JSON file formats: corpora, constraints, predictions, solver config,
//! count exports and trace records.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lr::{HyperParams, IterationRecord, Scope, SolveTrace, DEFAULT_MAX_ITER};
use crate::stats::{Constraint, Triplet, TripletCounts};
use crate::types::{
    validate_instance, Assignment, Event, GoldLabel, Instance, LabelSet, PairCandidate, Violation, NONE_LABEL,
};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| {
        Error::InvalidInput(format!(
            "{}: line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json_string(value)?)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventRecord {
    pub id: String,
    #[serde(rename = "type")]
    pub event_type: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairRecord {
    pub source: EventRecord,
    pub target: EventRecord,
    pub scores: Vec<f64>,
    pub gold: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceRecord {
    pub doc_id: String,
    pub pairs: Vec<PairRecord>,
}

/// On-disk instance file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusFile {
    pub label_set: Vec<String>,
    /// Empty means any type is allowed.
    #[serde(default)]
    pub type_vocab: Vec<String>,
    pub instances: Vec<InstanceRecord>,
}

/// A label set, its type vocabulary and the scored instances.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub labels: LabelSet,
    pub type_vocab: Vec<String>,
    pub instances: Vec<Instance>,
}

impl Corpus {
    pub fn new(labels: LabelSet, instances: Vec<Instance>) -> Self {
        let mut type_vocab: Vec<String> = instances
            .iter()
            .flat_map(|i| &i.pairs)
            .flat_map(|p| [p.source.event_type.clone(), p.target.event_type.clone()])
            .collect();
        type_vocab.sort();
        type_vocab.dedup();
        Self {
            labels,
            type_vocab,
            instances,
        }
    }

    pub fn num_pairs(&self) -> usize {
        self.instances.iter().map(Instance::len).sum()
    }

    pub fn from_file(file: CorpusFile) -> Result<Self> {
        let labels = LabelSet::new(file.label_set)?;
        let instances = file
            .instances
            .into_iter()
            .map(|rec| {
                let pairs = rec
                    .pairs
                    .into_iter()
                    .enumerate()
                    .map(|(i, p)| {
                        let gold = match p.gold.as_deref() {
                            None => None,
                            Some(NONE_LABEL) => Some(GoldLabel::NonEvent),
                            Some(name) => Some(GoldLabel::Relation(labels.index_of(name).ok_or_else(|| {
                                Error::InvalidInput(format!(
                                    "document `{}`, pair {i}: unknown gold label `{name}`",
                                    rec.doc_id
                                ))
                            })?)),
                        };
                        Ok(PairCandidate::new(
                            Event::new(p.source.id, p.source.event_type),
                            Event::new(p.target.id, p.target.event_type),
                            p.scores,
                            gold,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Instance::new(rec.doc_id, pairs))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            labels,
            type_vocab: file.type_vocab,
            instances,
        })
    }

    pub fn to_file(&self) -> CorpusFile {
        CorpusFile {
            label_set: self.labels.names().to_vec(),
            type_vocab: self.type_vocab.clone(),
            instances: self
                .instances
                .iter()
                .map(|inst| InstanceRecord {
                    doc_id: inst.doc_id.clone(),
                    pairs: inst
                        .pairs
                        .iter()
                        .map(|p| PairRecord {
                            source: EventRecord {
                                id: p.source.id.clone(),
                                event_type: p.source.event_type.clone(),
                            },
                            target: EventRecord {
                                id: p.target.id.clone(),
                                event_type: p.target.event_type.clone(),
                            },
                            scores: p.scores.clone(),
                            gold: p.gold.map(|g| match g {
                                GoldLabel::Relation(r) => self.labels.name(r).to_string(),
                                GoldLabel::NonEvent => NONE_LABEL.to_string(),
                            }),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_file(read_json(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, &self.to_file())
    }

    /// Per-document violations, including event types outside a non-empty
    /// vocabulary and duplicate document ids.
    pub fn violations(&self) -> Vec<(String, Violation)> {
        let mut out = Vec::new();
        let mut ids = std::collections::BTreeSet::new();
        for inst in &self.instances {
            if !ids.insert(inst.doc_id.as_str()) {
                out.push((
                    inst.doc_id.clone(),
                    Violation {
                        pair: None,
                        field: "doc_id",
                        reason: "duplicate document id".into(),
                    },
                ));
            }
            for v in validate_instance(inst, &self.labels) {
                out.push((inst.doc_id.clone(), v));
            }
            if !self.type_vocab.is_empty() {
                for (i, p) in inst.pairs.iter().enumerate() {
                    for (field, e) in [("source", &p.source), ("target", &p.target)] {
                        if !self.type_vocab.contains(&e.event_type) {
                            out.push((
                                inst.doc_id.clone(),
                                Violation {
                                    pair: Some(i),
                                    field,
                                    reason: format!("event type `{}` not in type_vocab", e.event_type),
                                },
                            ));
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintRecord {
    pub source_type: String,
    pub target_type: String,
    pub relation: String,
    pub p_star: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintFile {
    pub constraints: Vec<ConstraintRecord>,
}

impl ConstraintFile {
    pub fn from_constraints(constraints: &[Constraint], labels: &LabelSet) -> Self {
        Self {
            constraints: constraints
                .iter()
                .map(|c| ConstraintRecord {
                    source_type: c.triplet.source_type.clone(),
                    target_type: c.triplet.target_type.clone(),
                    relation: labels.name(c.relation()).to_string(),
                    p_star: c.p_star,
                    theta: c.theta,
                })
                .collect(),
        }
    }

    pub fn resolve(&self, labels: &LabelSet) -> Result<Vec<Constraint>> {
        self.constraints
            .iter()
            .map(|r| {
                let relation = labels.require(&r.relation)?;
                Constraint::new(
                    Triplet::new(r.source_type.clone(), r.target_type.clone(), relation),
                    r.p_star,
                    r.theta,
                )
            })
            .collect()
    }
}

pub fn load_constraints(path: &Path, labels: &LabelSet) -> Result<Vec<Constraint>> {
    read_json::<ConstraintFile>(path)?.resolve(labels)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocumentPrediction {
    pub doc_id: String,
    pub labels: Vec<String>,
}

/// One label name per pair, per document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionFile {
    pub label_set: Vec<String>,
    pub predictions: Vec<DocumentPrediction>,
}

impl PredictionFile {
    pub fn new(instances: &[Instance], assignments: &[Assignment], labels: &LabelSet) -> Self {
        Self {
            label_set: labels.names().to_vec(),
            predictions: instances
                .iter()
                .zip(assignments)
                .map(|(i, a)| DocumentPrediction {
                    doc_id: i.doc_id.clone(),
                    labels: a.labels.iter().map(|&l| labels.name(l).to_string()).collect(),
                })
                .collect(),
        }
    }

    /// Aligns predictions to a corpus by document id and pair count.
    pub fn align(&self, corpus: &Corpus) -> Result<Vec<Assignment>> {
        if self.label_set != corpus.labels.names() {
            return Err(Error::InvalidInput(format!(
                "prediction label set {:?} differs from corpus label set {:?}",
                self.label_set,
                corpus.labels.names()
            )));
        }
        let by_doc: std::collections::BTreeMap<&str, &DocumentPrediction> =
            self.predictions.iter().map(|p| (p.doc_id.as_str(), p)).collect();
        if by_doc.len() != self.predictions.len() {
            return Err(Error::InvalidInput("duplicate document ids in predictions".into()));
        }
        corpus
            .instances
            .iter()
            .map(|inst| {
                let pred = by_doc
                    .get(inst.doc_id.as_str())
                    .ok_or_else(|| Error::InvalidInput(format!("no predictions for document `{}`", inst.doc_id)))?;
                if pred.labels.len() != inst.len() {
                    return Err(Error::InvalidInput(format!(
                        "document `{}`: {} predictions for {} pairs (first unmatched pair: {})",
                        inst.doc_id,
                        pred.labels.len(),
                        inst.len(),
                        pred.labels.len().min(inst.len())
                    )));
                }
                let labels = pred
                    .labels
                    .iter()
                    .enumerate()
                    .map(|(i, name)| {
                        corpus.labels.index_of(name).ok_or_else(|| {
                            Error::InvalidInput(format!(
                                "document `{}`, pair {i}: unknown predicted label `{name}`",
                                inst.doc_id
                            ))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Assignment::new(labels))
            })
            .collect()
    }
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

fn default_threshold() -> f64 {
    0.03
}

fn default_splits() -> usize {
    5
}

fn default_stability_tol() -> f64 {
    0.001
}

fn default_gap_min() -> f64 {
    0.1
}

/// Hyper-parameter grid searched during greedy selection when `regrid` is on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
    pub theta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Relation used for candidate triplets; defaults to `vague` when present,
    /// otherwise the most frequent gold label in train.
    #[serde(default)]
    pub default_relation: Option<String>,
    /// Re-run the grid for every greedy evaluation instead of using the
    /// fixed top-level hyper-parameters.
    #[serde(default)]
    pub regrid: bool,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default = "default_splits")]
    pub splits: usize,
    #[serde(default = "default_stability_tol")]
    pub stability_tol: f64,
    #[serde(default = "default_gap_min")]
    pub gap_min: f64,
    #[serde(default)]
    pub split_seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            threshold: default_threshold(),
            default_relation: None,
            regrid: false,
            grid: None,
            splits: default_splits(),
            stability_tol: default_stability_tol(),
            gap_min: default_gap_min(),
            split_seed: 0,
        }
    }
}

/// Solver configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub theta: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub scope: Scope,
    #[serde(default)]
    pub selection: SelectionConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 5.0,
            gamma: 0.7,
            theta: 0.05,
            max_iter: DEFAULT_MAX_ITER,
            scope: Scope::PerDocument,
            selection: SelectionConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn hyper(&self) -> Result<HyperParams> {
        HyperParams::new(self.alpha, self.gamma, self.theta, self.max_iter)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = read_json(path)?;
        cfg.hyper()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCountRecord {
    pub source_type: String,
    pub target_type: String,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripletCountRecord {
    pub source_type: String,
    pub target_type: String,
    pub relation: String,
    pub count: u64,
}

/// Exported form of [`TripletCounts`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountsFile {
    pub pair_counts: Vec<PairCountRecord>,
    pub triplet_counts: Vec<TripletCountRecord>,
}

impl CountsFile {
    pub fn new(counts: &TripletCounts, labels: &LabelSet) -> Self {
        Self {
            pair_counts: counts
                .pair_counts
                .iter()
                .map(|((m, n), &count)| PairCountRecord {
                    source_type: m.clone(),
                    target_type: n.clone(),
                    count,
                })
                .collect(),
            triplet_counts: counts
                .triplet_counts
                .iter()
                .map(|(t, &count)| TripletCountRecord {
                    source_type: t.source_type.clone(),
                    target_type: t.target_type.clone(),
                    relation: labels.name(t.relation).to_string(),
                    count,
                })
                .collect(),
        }
    }
}

/// One line of a trace export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub doc_id: Option<String>,
    #[serde(flatten)]
    pub record: IterationRecord,
}

/// JSON-lines rendering of traces, one record per iteration.
pub fn trace_jsonl(traces: &[SolveTrace]) -> Result<String> {
    let mut out = String::new();
    for t in traces {
        for r in &t.records {
            out.push_str(&serde_json::to_string(&TraceLine {
                doc_id: t.doc_id.clone(),
                record: r.clone(),
            })?);
            out.push('\n');
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
      "label_set": ["before", "after", "vague"],
      "type_vocab": ["occurrence", "reporting"],
      "instances": [{"doc_id": "d1", "pairs": [
        {"source": {"id": "e1", "type": "occurrence"}, "target": {"id": "e2", "type": "reporting"},
         "scores": [0.2, 0.3, 0.5], "gold": "vague"},
        {"source": {"id": "e2", "type": "reporting"}, "target": {"id": "e3", "type": "occurrence"},
         "scores": [0.6, 0.3, 0.1], "gold": "none"},
        {"source": {"id": "e1", "type": "occurrence"}, "target": {"id": "e3", "type": "occurrence"},
         "scores": [0.6, 0.3, 0.1], "gold": null}
      ]}]
    }"#;

    #[test]
    fn parses_and_round_trips() {
        let file: CorpusFile = serde_json::from_str(SAMPLE).unwrap();
        let corpus = Corpus::from_file(file.clone()).unwrap();
        assert_eq!(corpus.instances[0].pairs[0].gold, Some(GoldLabel::Relation(2)));
        assert_eq!(corpus.instances[0].pairs[1].gold, Some(GoldLabel::NonEvent));
        assert_eq!(corpus.instances[0].pairs[2].gold, None);
        assert!(corpus.violations().is_empty());
        assert_eq!(corpus.to_file(), file);
    }

    #[test]
    fn unknown_fields_rejected() {
        let bad = SAMPLE.replace("\"doc_id\": \"d1\"", "\"doc_id\": \"d1\", \"extra\": 1");
        assert!(serde_json::from_str::<CorpusFile>(&bad).is_err());
    }

    #[test]
    fn unknown_gold_label_rejected() {
        let bad = SAMPLE.replace("\"gold\": \"vague\"", "\"gold\": \"overlap\"");
        let file: CorpusFile = serde_json::from_str(&bad).unwrap();
        assert!(Corpus::from_file(file).is_err());
    }

    #[test]
    fn out_of_vocab_type_is_a_violation() {
        let bad = SAMPLE.replace(
            "\"type_vocab\": [\"occurrence\", \"reporting\"]",
            "\"type_vocab\": [\"occurrence\"]",
        );
        let corpus = Corpus::from_file(serde_json::from_str(&bad).unwrap()).unwrap();
        assert_eq!(corpus.violations().len(), 2);
    }

    #[test]
    fn reference_profiles_are_accepted_verbatim() {
        let cfg: SolverConfig = serde_json::from_str(r#"{"alpha": 5.0, "gamma": 0.7, "theta": 0.05}"#).unwrap();
        let h = cfg.hyper().unwrap();
        assert_eq!(h, HyperParams::timebank_dense());
        assert_eq!(cfg.scope, Scope::PerDocument);
        let full: SolverConfig =
            serde_json::from_str(r#"{"alpha": 5.0, "gamma": 0.8, "theta": 0.02, "max_iter": 100, "scope": "corpus"}"#)
                .unwrap();
        assert_eq!(full.hyper().unwrap(), HyperParams::i2b2());
        assert_eq!(full.scope, Scope::Corpus);
    }

    #[test]
    fn constraints_resolve_by_name() {
        let labels = LabelSet::timebank_dense();
        let file: ConstraintFile = serde_json::from_str(
            r#"{"constraints": [{"source_type": "occurrence", "target_type": "occurrence", "relation": "vague", "p_star": 0.4, "theta": 0.05}]}"#,
        )
        .unwrap();
        let cs = file.resolve(&labels).unwrap();
        assert_eq!(cs[0].relation(), 5);
        assert_eq!(ConstraintFile::from_constraints(&cs, &labels), file);
        let bad: ConstraintFile = serde_json::from_str(
            r#"{"constraints": [{"source_type": "a", "target_type": "b", "relation": "overlap", "p_star": 0.4}]}"#,
        )
        .unwrap();
        assert!(bad.resolve(&labels).is_err());
    }

    #[test]
    fn predictions_align() {
        let corpus = Corpus::from_file(serde_json::from_str(SAMPLE).unwrap()).unwrap();
        let asg = vec![corpus.instances[0].baseline()];
        let file = PredictionFile::new(&corpus.instances, &asg, &corpus.labels);
        assert_eq!(file.align(&corpus).unwrap(), asg);
        let mut short = file.clone();
        short.predictions[0].labels.pop();
        assert!(short.align(&corpus).is_err());
    }
}
