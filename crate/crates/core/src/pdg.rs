//! Line-level program dependence graphs, explanations and their weighted union.
//!
//! A [`Pdg`] has one node per source line. Edges carry a [`DepKind`] and, for
//! data dependencies, the name of the variable flowing along them. An
//! [`Explanation`] is the per-line importance scoring attached to a model's
//! prediction; [`build_weighted_pdg`] attaches those scores to the graph.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Version written into every serialized graph document.
pub const PDG_SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdgError {
    #[error("line numbers are 1-based, got 0")]
    ZeroLine,
    #[error("explanation is for `{explanation}` but graph is for `{graph}`")]
    IdentityMismatch { graph: String, explanation: String },
    #[error("malformed explanation: {0}")]
    MalformedExplanation(String),
    #[error("malformed graph: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("unsupported schema version `{0}`")]
    SchemaVersion(String),
    #[error("json: {0}")]
    Json(String),
}

/// 1-based line number within a single function's source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LineId(u32);

impl LineId {
    pub fn new(value: u32) -> Result<Self, PdgError> {
        if value == 0 {
            Err(PdgError::ZeroLine)
        } else {
            Ok(Self(value))
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl fmt::Display for LineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl TryFrom<u32> for LineId {
    type Error = PdgError;
    fn try_from(value: u32) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl Serialize for LineId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u32(self.0)
    }
}

impl<'de> Deserialize<'de> for LineId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = u32::deserialize(d)?;
        LineId::new(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepKind {
    Control,
    Data,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PdgEdge {
    pub src: LineId,
    pub dst: LineId,
    pub kind: DepKind,
    #[serde(rename = "var", default, skip_serializing_if = "Option::is_none")]
    pub variable: Option<String>,
}

impl PdgEdge {
    pub fn control(src: LineId, dst: LineId) -> Self {
        Self { src, dst, kind: DepKind::Control, variable: None }
    }

    pub fn data(src: LineId, dst: LineId, variable: impl Into<String>) -> Self {
        Self { src, dst, kind: DepKind::Data, variable: Some(variable.into()) }
    }

    /// Self-loops come from loop-carried dependencies or from two statements
    /// sharing a line. They are kept but never shorten a path.
    pub fn is_self_loop(&self) -> bool {
        self.src == self.dst
    }
}

/// A well-formedness problem reported by [`validate_pdg`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    DanglingEndpoint { edge: usize, line: LineId },
    DuplicateNode { line: LineId },
    MissingVariable { edge: usize },
    UnexpectedVariable { edge: usize },
    StrayLineVars { line: LineId },
    StrayLineText { line: LineId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DanglingEndpoint { edge, line } => {
                write!(f, "dangling-endpoint: edge #{edge} references line {line} which is not a node")
            }
            Violation::DuplicateNode { line } => write!(f, "duplicate-node: line {line}"),
            Violation::MissingVariable { edge } => {
                write!(f, "missing-variable: data edge #{edge} has no variable")
            }
            Violation::UnexpectedVariable { edge } => {
                write!(f, "unexpected-variable: control edge #{edge} carries a variable")
            }
            Violation::StrayLineVars { line } => write!(f, "stray-line-vars: line {line} is not a node"),
            Violation::StrayLineText { line } => write!(f, "stray-line-text: line {line} is not a node"),
        }
    }
}

/// Line-level program dependence graph of one function.
///
/// `nodes` keeps insertion order so that documents with repeated lines can be
/// diagnosed; graphs built by this crate keep it sorted and unique.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Pdg {
    pub function_id: String,
    pub nodes: Vec<LineId>,
    pub edges: Vec<PdgEdge>,
    pub line_text: BTreeMap<LineId, String>,
    pub line_vars: BTreeMap<LineId, BTreeSet<String>>,
}

impl Pdg {
    pub fn contains(&self, line: LineId) -> bool {
        self.nodes.contains(&line)
    }

    pub fn node_set(&self) -> BTreeSet<LineId> {
        self.nodes.iter().copied().collect()
    }

    pub fn vars(&self, line: LineId) -> Option<&BTreeSet<String>> {
        self.line_vars.get(&line)
    }

    pub fn to_document(&self) -> PdgDocument {
        PdgDocument {
            schema_version: PDG_SCHEMA_VERSION.to_string(),
            function_id: self.function_id.clone(),
            nodes: self
                .nodes
                .iter()
                .map(|&line| NodeDoc {
                    line,
                    text: self.line_text.get(&line).cloned().unwrap_or_default(),
                    vars: self.line_vars.get(&line).map(|v| v.iter().cloned().collect()).unwrap_or_default(),
                })
                .collect(),
            edges: self.edges.clone(),
        }
    }

    pub fn from_document(doc: PdgDocument) -> Result<Self, PdgError> {
        check_major_version(&doc.schema_version)?;
        let mut pdg = Pdg { function_id: doc.function_id, edges: doc.edges, ..Default::default() };
        for node in doc.nodes {
            pdg.nodes.push(node.line);
            pdg.line_text.insert(node.line, node.text);
            pdg.line_vars.insert(node.line, node.vars.into_iter().collect());
        }
        Ok(pdg)
    }

    /// Canonical JSON form: fields in schema order, pretty-printed.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("graph documents always serialize")
    }

    /// Parses and validates a canonical document.
    pub fn from_json(text: &str) -> Result<Self, PdgError> {
        let doc: PdgDocument = serde_json::from_str(text).map_err(|e| PdgError::Json(e.to_string()))?;
        let pdg = Self::from_document(doc)?;
        let violations = validate_pdg(&pdg);
        if violations.is_empty() {
            Ok(pdg)
        } else {
            Err(PdgError::Invalid(violations))
        }
    }
}

pub(crate) fn check_major_version(version: &str) -> Result<(), PdgError> {
    let supported = PDG_SCHEMA_VERSION.split('.').next();
    if version.split('.').next() == supported {
        Ok(())
    } else {
        Err(PdgError::SchemaVersion(version.to_string()))
    }
}

/// On-disk form of a [`Pdg`]. Field order matches `schemas/pdg.schema.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdgDocument {
    pub schema_version: String,
    pub function_id: String,
    pub nodes: Vec<NodeDoc>,
    pub edges: Vec<PdgEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub line: LineId,
    pub text: String,
    #[serde(default)]
    pub vars: Vec<String>,
}

/// Returns every invariant violation; empty iff the graph is well-formed.
pub fn validate_pdg(pdg: &Pdg) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for &line in &pdg.nodes {
        if !seen.insert(line) {
            out.push(Violation::DuplicateNode { line });
        }
    }
    for (idx, edge) in pdg.edges.iter().enumerate() {
        for line in [edge.src, edge.dst] {
            if !seen.contains(&line) {
                out.push(Violation::DanglingEndpoint { edge: idx, line });
            }
        }
        match (edge.kind, &edge.variable) {
            (DepKind::Data, None) => out.push(Violation::MissingVariable { edge: idx }),
            (DepKind::Control, Some(_)) => out.push(Violation::UnexpectedVariable { edge: idx }),
            _ => {}
        }
    }
    for line in pdg.line_vars.keys() {
        if !seen.contains(line) {
            out.push(Violation::StrayLineVars { line: *line });
        }
    }
    for line in pdg.line_text.keys() {
        if !seen.contains(line) {
            out.push(Violation::StrayLineText { line: *line });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplanationEntry {
    pub line: LineId,
    pub score: f64,
}

/// Suspicious lines of one prediction with their importance scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub function_id: String,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    pub entries: Vec<ExplanationEntry>,
}

fn default_confidence() -> f64 {
    1.0
}

impl Explanation {
    pub fn new(function_id: impl Into<String>, confidence: f64, entries: Vec<(u32, f64)>) -> Result<Self, PdgError> {
        let entries = entries
            .into_iter()
            .map(|(line, score)| Ok(ExplanationEntry { line: LineId::new(line)?, score }))
            .collect::<Result<Vec<_>, PdgError>>()?;
        let expl = Self { function_id: function_id.into(), confidence, entries };
        expl.validate()?;
        Ok(expl)
    }

    pub fn validate(&self) -> Result<(), PdgError> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(PdgError::MalformedExplanation(format!("confidence {} outside [0, 1]", self.confidence)));
        }
        let mut seen = HashSet::new();
        for entry in &self.entries {
            if !seen.insert(entry.line) {
                return Err(PdgError::MalformedExplanation(format!("line {} listed twice", entry.line)));
            }
            if !entry.score.is_finite() || entry.score < 0.0 {
                return Err(PdgError::MalformedExplanation(format!("line {} has score {}", entry.line, entry.score)));
            }
        }
        Ok(())
    }

    pub fn lines(&self) -> impl Iterator<Item = LineId> + '_ {
        self.entries.iter().map(|e| e.line)
    }

    pub fn score(&self, line: LineId) -> Option<f64> {
        self.entries.iter().find(|e| e.line == line).map(|e| e.score)
    }

    /// Keeps only entries whose line is in `keep`, preserving order.
    pub fn restricted_to(&self, keep: &BTreeSet<LineId>) -> Explanation {
        Explanation {
            function_id: self.function_id.clone(),
            confidence: self.confidence,
            entries: self.entries.iter().filter(|e| keep.contains(&e.line)).copied().collect(),
        }
    }
}

/// A PDG whose nodes carry the explanation's importance scores.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPdg {
    pub pdg: Pdg,
    pub weights: BTreeMap<LineId, f64>,
    /// Explanation lines that have no node in the graph, in explanation order.
    pub dropped: Vec<LineId>,
}

impl WeightedPdg {
    pub fn weight(&self, line: LineId) -> Option<f64> {
        self.weights.get(&line).copied()
    }

    /// Explanation lines resident in the graph.
    pub fn resident(&self) -> BTreeSet<LineId> {
        self.weights.keys().copied().collect()
    }
}

/// Attaches explanation scores to graph nodes.
///
/// Lines without a node go to `dropped`. With `normalize`, the retained
/// weights are rescaled to sum to 1 (left unchanged when they sum to 0).
pub fn build_weighted_pdg(pdg: &Pdg, expl: &Explanation, normalize: bool) -> Result<WeightedPdg, PdgError> {
    if pdg.function_id != expl.function_id {
        return Err(PdgError::IdentityMismatch {
            graph: pdg.function_id.clone(),
            explanation: expl.function_id.clone(),
        });
    }
    expl.validate()?;
    let nodes = pdg.node_set();
    let mut weights = BTreeMap::new();
    let mut dropped = Vec::new();
    for entry in &expl.entries {
        if nodes.contains(&entry.line) {
            weights.insert(entry.line, entry.score);
        } else {
            dropped.push(entry.line);
        }
    }
    if normalize {
        let total: f64 = weights.values().sum();
        if total > 0.0 {
            for w in weights.values_mut() {
                *w /= total;
            }
        }
    }
    Ok(WeightedPdg { pdg: pdg.clone(), weights, dropped })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(n: u32) -> LineId {
        LineId::new(n).unwrap()
    }

    fn vrrp_like() -> Pdg {
        let nodes: Vec<LineId> = [1, 3, 4, 5, 7, 8, 9].into_iter().map(l).collect();
        Pdg {
            function_id: "vrrp_print_data".into(),
            line_text: nodes.iter().map(|&n| (n, format!("line {n}"))).collect(),
            line_vars: nodes.iter().map(|&n| (n, BTreeSet::new())).collect(),
            nodes,
            edges: vec![
                PdgEdge::data(l(1), l(3), "data"),
                PdgEdge::control(l(3), l(4)),
                PdgEdge::control(l(3), l(5)),
                PdgEdge::control(l(3), l(7)),
                PdgEdge::data(l(7), l(8), "file"),
                PdgEdge::data(l(8), l(9), "written"),
            ],
        }
    }

    fn vrrp_expl() -> Explanation {
        Explanation::new(
            "vrrp_print_data",
            0.9,
            vec![(1, 0.13), (3, 0.06), (4, 0.18), (5, 0.27), (7, 0.08), (8, 0.19), (9, 0.04), (2, 0.02)],
        )
        .unwrap()
    }

    #[test]
    fn zero_line_rejected() {
        assert_eq!(LineId::new(0), Err(PdgError::ZeroLine));
        assert!(serde_json::from_str::<LineId>("0").is_err());
    }

    #[test]
    fn weights_attach_and_non_nodes_drop() {
        let w = build_weighted_pdg(&vrrp_like(), &vrrp_expl(), false).unwrap();
        let keys: Vec<u32> = w.weights.keys().map(|k| k.get()).collect();
        assert_eq!(keys, vec![1, 3, 4, 5, 7, 8, 9]);
        assert_eq!(w.dropped, vec![l(2)]);
        assert_eq!(w.weight(l(1)), Some(0.13));
        assert_eq!(w.weight(l(7)), Some(0.08));
    }

    #[test]
    fn normalization_sums_to_one() {
        let w = build_weighted_pdg(&vrrp_like(), &vrrp_expl(), true).unwrap();
        let total: f64 = w.weights.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((w.weight(l(5)).unwrap() - 0.27 / 0.95).abs() < 1e-12);
    }

    #[test]
    fn all_zero_weights_left_alone() {
        let expl = Explanation::new("vrrp_print_data", 0.5, vec![(1, 0.0), (3, 0.0)]).unwrap();
        let w = build_weighted_pdg(&vrrp_like(), &expl, true).unwrap();
        assert!(w.weights.values().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_and_all_dropped_explanations() {
        let empty = Explanation::new("vrrp_print_data", 0.5, vec![]).unwrap();
        let w = build_weighted_pdg(&vrrp_like(), &empty, true).unwrap();
        assert!(w.weights.is_empty() && w.dropped.is_empty());

        let comments = Explanation::new("vrrp_print_data", 0.5, vec![(2, 0.5), (6, 0.5)]).unwrap();
        let w = build_weighted_pdg(&vrrp_like(), &comments, true).unwrap();
        assert!(w.weights.is_empty());
        assert_eq!(w.dropped, vec![l(2), l(6)]);
    }

    #[test]
    fn identity_and_duplicates_rejected() {
        let mut other = vrrp_expl();
        other.function_id = "other".into();
        assert!(matches!(build_weighted_pdg(&vrrp_like(), &other, false), Err(PdgError::IdentityMismatch { .. })));
        let dup = Explanation {
            function_id: "vrrp_print_data".into(),
            confidence: 0.5,
            entries: vec![ExplanationEntry { line: l(1), score: 0.1 }, ExplanationEntry { line: l(1), score: 0.2 }],
        };
        assert!(matches!(build_weighted_pdg(&vrrp_like(), &dup, false), Err(PdgError::MalformedExplanation(_))));
        assert!(Explanation::new("f", 0.5, vec![(1, -0.1)]).is_err());
        assert!(Explanation::new("f", 0.5, vec![(1, f64::NAN)]).is_err());
        assert!(Explanation::new("f", 1.5, vec![]).is_err());
    }

    #[test]
    fn validation_reports_each_violation() {
        assert!(validate_pdg(&vrrp_like()).is_empty());

        let mut g = vrrp_like();
        g.edges.push(PdgEdge::control(l(3), l(12)));
        assert_eq!(validate_pdg(&g), vec![Violation::DanglingEndpoint { edge: 6, line: l(12) }]);

        let mut g = vrrp_like();
        g.edges[0].variable = None;
        assert_eq!(validate_pdg(&g), vec![Violation::MissingVariable { edge: 0 }]);

        let mut g = vrrp_like();
        g.nodes.push(l(4));
        assert_eq!(validate_pdg(&g), vec![Violation::DuplicateNode { line: l(4) }]);

        let mut g = vrrp_like();
        g.line_vars.insert(l(40), BTreeSet::new());
        assert_eq!(validate_pdg(&g), vec![Violation::StrayLineVars { line: l(40) }]);
    }

    #[test]
    fn document_round_trip_is_canonical() {
        let g = vrrp_like();
        let json = g.to_json();
        let back = Pdg::from_json(&json).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.to_json(), json);
        let first_keys: Vec<&str> = json.lines().skip(1).take(2).map(|s| s.trim()).collect();
        assert!(first_keys[0].starts_with("\"schema_version\""));
        assert!(first_keys[1].starts_with("\"function_id\""));
    }

    #[test]
    fn invalid_documents_rejected() {
        let mut doc = vrrp_like().to_document();
        doc.schema_version = "2.0".into();
        let text = serde_json::to_string(&doc).unwrap();
        assert!(matches!(Pdg::from_json(&text), Err(PdgError::SchemaVersion(_))));

        let mut g = vrrp_like();
        g.edges.push(PdgEdge::control(l(3), l(12)));
        assert!(matches!(Pdg::from_json(&g.to_json()), Err(PdgError::Invalid(_))));
    }
}
