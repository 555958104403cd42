//! Import of dependence graphs exported by external analysis platforms.
//!
//! The accepted document is JSON:
//!
//! ```json
//! {
//!   "function_id": "vrrp_print_data",
//!   "nodes": [{ "id": 7, "lineNumber": 3, "code": "if (!data)" }],
//!   "edges": [
//!     { "src": 7, "dst": 9, "label": "CDG" },
//!     { "src": 2, "dst": 7, "label": "REACHING_DEF", "variable": "data" }
//!   ]
//! }
//! ```
//!
//! `CDG` edges become control dependences; `REACHING_DEF` and `DDG` edges
//! become data dependences and must name their variable. Other labels (AST,
//! CFG, ...) are dropped and counted. `line` is accepted as an alias for
//! `lineNumber`, and node fields other than these are ignored.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::raw::{RawDepGraph, RawEdge, RawNode};
use crate::pdg::{DepKind, LineId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ImportError {
    #[error("node {0} has no line number")]
    MissingLine(u64),
    #[error("node {0} has line number 0")]
    ZeroLine(u64),
    #[error("node id {0} appears more than once")]
    DuplicateNode(u64),
    #[error("edge #{index} references unknown node {node}")]
    UnknownNode { index: usize, node: u64 },
    #[error("data edge #{0} carries no variable")]
    MissingVariable(usize),
    #[error("invalid graph document: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExportDocument {
    #[serde(default)]
    pub function_id: String,
    pub nodes: Vec<ExportNode>,
    #[serde(default)]
    pub edges: Vec<ExportEdge>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExportNode {
    pub id: u64,
    #[serde(rename = "lineNumber", alias = "line", default)]
    pub line_number: Option<u32>,
    #[serde(default)]
    pub code: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExportEdge {
    pub src: u64,
    pub dst: u64,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variable: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Imported {
    pub graph: RawDepGraph,
    /// Edges whose label is neither a control nor a data dependence.
    pub dropped_edges: usize,
}

fn edge_kind(label: &str) -> Option<DepKind> {
    match label.to_ascii_uppercase().as_str() {
        "CDG" => Some(DepKind::Control),
        "REACHING_DEF" | "DDG" => Some(DepKind::Data),
        _ => None,
    }
}

pub fn import_raw_graph(document: &str) -> Result<Imported, ImportError> {
    let doc: ExportDocument = serde_json::from_str(document).map_err(|e| ImportError::Json(e.to_string()))?;
    import_document(doc)
}

pub fn import_document(doc: ExportDocument) -> Result<Imported, ImportError> {
    let mut ids = HashSet::new();
    let mut nodes = Vec::with_capacity(doc.nodes.len());
    for node in doc.nodes {
        let line = node.line_number.ok_or(ImportError::MissingLine(node.id))?;
        let line = LineId::new(line).map_err(|_| ImportError::ZeroLine(node.id))?;
        if !ids.insert(node.id) {
            return Err(ImportError::DuplicateNode(node.id));
        }
        nodes.push(RawNode { id: node.id, line, code: node.code });
    }
    let mut edges = Vec::new();
    let mut dropped_edges = 0;
    for (index, edge) in doc.edges.into_iter().enumerate() {
        let Some(kind) = edge_kind(&edge.label) else {
            dropped_edges += 1;
            continue;
        };
        for node in [edge.src, edge.dst] {
            if !ids.contains(&node) {
                return Err(ImportError::UnknownNode { index, node });
            }
        }
        let variable = match kind {
            DepKind::Data => Some(edge.variable.ok_or(ImportError::MissingVariable(index))?),
            DepKind::Control => None,
        };
        edges.push(RawEdge { src: edge.src, dst: edge.dst, kind, variable });
    }
    Ok(Imported { graph: RawDepGraph { function_id: doc.function_id, nodes, edges }, dropped_edges })
}

/// Writes a graph in the import format, using `CDG` and `REACHING_DEF`.
pub fn export_raw_graph(raw: &RawDepGraph) -> String {
    let doc = ExportDocument {
        function_id: raw.function_id.clone(),
        nodes: raw
            .nodes
            .iter()
            .map(|n| ExportNode { id: n.id, line_number: Some(n.line.get()), code: n.code.clone() })
            .collect(),
        edges: raw
            .edges
            .iter()
            .map(|e| ExportEdge {
                src: e.src,
                dst: e.dst,
                label: match e.kind {
                    DepKind::Control => "CDG".into(),
                    DepKind::Data => "REACHING_DEF".into(),
                },
                variable: e.variable.clone(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("export documents always serialize")
}
