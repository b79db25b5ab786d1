//! Temporal graphs and their closure under inverse and composition rules.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::LabelSet;

/// Directed labelled edges between events, at most one label per ordered pair.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RelationGraph {
    events: BTreeSet<String>,
    edges: BTreeMap<(String, String), String>,
}

impl RelationGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_event(&mut self, id: impl Into<String>) {
        self.events.insert(id.into());
    }

    /// Adds an edge. Self-loops and a second label on an existing ordered
    /// pair are rejected.
    pub fn add_edge(
        &mut self,
        source: impl Into<String>,
        target: impl Into<String>,
        label: impl Into<String>,
    ) -> Result<()> {
        let (source, target, label) = (source.into(), target.into(), label.into());
        if source == target {
            return Err(Error::InvalidInput(format!("self-loop on `{source}`")));
        }
        if let Some(existing) = self.edges.get(&(source.clone(), target.clone())) {
            if *existing != label {
                return Err(Error::InvalidInput(format!(
                    "duplicate edge ({source}, {target}): `{existing}` vs `{label}`"
                )));
            }
            return Ok(());
        }
        self.events.insert(source.clone());
        self.events.insert(target.clone());
        self.edges.insert((source, target), label);
        Ok(())
    }

    pub fn from_edges<'a, I>(edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str, &'a str)>,
    {
        let mut g = Self::new();
        for (s, t, l) in edges {
            g.add_edge(s, t, l)?;
        }
        Ok(g)
    }

    pub fn label(&self, source: &str, target: &str) -> Option<&str> {
        self.edges
            .get(&(source.to_string(), target.to_string()))
            .map(String::as_str)
    }

    pub fn contains(&self, source: &str, target: &str, label: &str) -> bool {
        self.label(source, target) == Some(label)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.edges
            .iter()
            .map(|((s, t), l)| (s.as_str(), t.as_str(), l.as_str()))
    }

    pub fn events(&self) -> impl Iterator<Item = &str> {
        self.events.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Whether every edge of `self` is also an edge of `other`.
    pub fn is_subgraph_of(&self, other: &RelationGraph) -> bool {
        self.edges().all(|(s, t, l)| other.contains(s, t, l))
    }
}

/// Inverse map and composition table. Labels without an inverse entry (such
/// as `vague`) are opaque: they stay as given and never derive new edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClosureRules {
    inverse: BTreeMap<String, String>,
    compose: BTreeMap<(String, String), String>,
}

/// On-disk form of [`ClosureRules`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RulesFile {
    pub inverse: BTreeMap<String, String>,
    pub compose: Vec<[String; 3]>,
}

const INTERVAL_LABELS: [&str; 6] = ["before", "after", "includes", "is_included", "simultaneous", "overlap"];

impl ClosureRules {
    pub fn new(inverse: BTreeMap<String, String>, compose: BTreeMap<(String, String), String>) -> Result<Self> {
        for (a, b) in &inverse {
            match inverse.get(b) {
                Some(back) if back == a => {}
                _ => {
                    return Err(Error::InvalidRules(format!(
                        "inverse is not an involution at `{a}` -> `{b}`"
                    )))
                }
            }
        }
        for ((a, b), c) in &compose {
            for l in [a, b, c] {
                if !inverse.contains_key(l) {
                    return Err(Error::InvalidRules(format!(
                        "composition ({a}, {b}) -> {c} uses `{l}`, which has no inverse"
                    )));
                }
            }
        }
        Ok(Self { inverse, compose })
    }

    /// Sound minimal table: before, after, includes and is_included compose
    /// with themselves; simultaneous is an identity for composition; overlap
    /// does not compose. Entries are kept only for labels in `labels`.
    pub fn default_for(labels: &LabelSet) -> Self {
        let present: Vec<&str> = INTERVAL_LABELS
            .iter()
            .copied()
            .filter(|l| labels.index_of(l).is_some())
            .collect();
        let has = |l: &str| present.contains(&l);
        let mut inverse = BTreeMap::new();
        for (a, b) in [
            ("before", "after"),
            ("includes", "is_included"),
            ("simultaneous", "simultaneous"),
            ("overlap", "overlap"),
        ] {
            if has(a) && has(b) {
                inverse.insert(a.to_string(), b.to_string());
                inverse.insert(b.to_string(), a.to_string());
            }
        }
        let mut compose = BTreeMap::new();
        for l in ["before", "after", "includes", "is_included"] {
            if inverse.contains_key(l) {
                compose.insert((l.to_string(), l.to_string()), l.to_string());
            }
        }
        if inverse.contains_key("simultaneous") {
            for l in inverse.keys() {
                compose.insert(("simultaneous".to_string(), l.clone()), l.clone());
                compose.insert((l.clone(), "simultaneous".to_string()), l.clone());
            }
        }
        Self::new(inverse, compose).expect("default rules are well formed")
    }

    pub fn from_file(file: RulesFile, labels: &LabelSet) -> Result<Self> {
        for l in file.inverse.keys().chain(file.inverse.values()) {
            labels
                .require(l)
                .map_err(|_| Error::InvalidRules(format!("label `{l}` is not in the label set")))?;
        }
        let mut compose = BTreeMap::new();
        for [a, b, c] in file.compose {
            if let Some(prev) = compose.insert((a.clone(), b.clone()), c.clone()) {
                if prev != c {
                    return Err(Error::InvalidRules(format!(
                        "({a}, {b}) composes to both `{prev}` and `{c}`"
                    )));
                }
            }
        }
        Self::new(file.inverse, compose)
    }

    pub fn to_file(&self) -> RulesFile {
        RulesFile {
            inverse: self.inverse.clone(),
            compose: self
                .compose
                .iter()
                .map(|((a, b), c)| [a.clone(), b.clone(), c.clone()])
                .collect(),
        }
    }

    pub fn inverse(&self, label: &str) -> Option<&str> {
        self.inverse.get(label).map(String::as_str)
    }

    pub fn compose(&self, first: &str, second: &str) -> Option<&str> {
        self.compose
            .get(&(first.to_string(), second.to_string()))
            .map(String::as_str)
    }

    pub fn composition_table(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.compose
            .iter()
            .map(|((a, b), c)| (a.as_str(), b.as_str(), c.as_str()))
    }
}

/// An ordered pair that received more than one label during closure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Inconsistency {
    pub source: String,
    pub target: String,
    pub labels: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClosureOutcome {
    pub graph: RelationGraph,
    pub inconsistencies: Vec<Inconsistency>,
}

/// Least fixed point of adding inverse and composed edges. Pairs that end up
/// with several labels are dropped from the result and reported.
pub fn closure(graph: &RelationGraph, rules: &ClosureRules) -> ClosureOutcome {
    type Fact = (String, String, String);
    let mut facts: BTreeSet<Fact> = BTreeSet::new();
    let mut out_edges: BTreeMap<String, BTreeSet<(String, String)>> = BTreeMap::new();
    let mut in_edges: BTreeMap<String, BTreeSet<(String, String)>> = BTreeMap::new();
    let mut queue: VecDeque<Fact> = VecDeque::new();

    let push = |fact: Fact,
                facts: &mut BTreeSet<Fact>,
                queue: &mut VecDeque<Fact>,
                out_edges: &mut BTreeMap<String, BTreeSet<(String, String)>>,
                in_edges: &mut BTreeMap<String, BTreeSet<(String, String)>>| {
        if fact.0 == fact.1 || facts.contains(&fact) {
            return;
        }
        out_edges
            .entry(fact.0.clone())
            .or_default()
            .insert((fact.1.clone(), fact.2.clone()));
        in_edges
            .entry(fact.1.clone())
            .or_default()
            .insert((fact.0.clone(), fact.2.clone()));
        facts.insert(fact.clone());
        queue.push_back(fact);
    };

    for (s, t, l) in graph.edges() {
        push(
            (s.to_string(), t.to_string(), l.to_string()),
            &mut facts,
            &mut queue,
            &mut out_edges,
            &mut in_edges,
        );
    }

    while let Some((a, b, l)) = queue.pop_front() {
        let mut derived: Vec<Fact> = Vec::new();
        if let Some(inv) = rules.inverse(&l) {
            derived.push((b.clone(), a.clone(), inv.to_string()));
        }
        if let Some(outs) = out_edges.get(&b) {
            for (c, l2) in outs {
                if let Some(l3) = rules.compose(&l, l2) {
                    derived.push((a.clone(), c.clone(), l3.to_string()));
                }
            }
        }
        if let Some(ins) = in_edges.get(&a) {
            for (z, l0) in ins {
                if let Some(l3) = rules.compose(l0, &l) {
                    derived.push((z.clone(), b.clone(), l3.to_string()));
                }
            }
        }
        for f in derived {
            push(f, &mut facts, &mut queue, &mut out_edges, &mut in_edges);
        }
    }

    let mut by_pair: BTreeMap<(String, String), Vec<String>> = BTreeMap::new();
    for (a, b, l) in facts {
        by_pair.entry((a, b)).or_default().push(l);
    }
    let mut closed = RelationGraph {
        events: graph.events.clone(),
        edges: BTreeMap::new(),
    };
    let mut inconsistencies = Vec::new();
    for ((a, b), labels) in by_pair {
        if labels.len() == 1 {
            closed.events.insert(a.clone());
            closed.events.insert(b.clone());
            closed.edges.insert((a, b), labels.into_iter().next().unwrap());
        } else {
            inconsistencies.push(Inconsistency {
                source: a,
                target: b,
                labels,
            });
        }
    }
    ClosureOutcome {
        graph: closed,
        inconsistencies,
    }
}
