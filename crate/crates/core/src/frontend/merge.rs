use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::raw::RawDepGraph;
use super::token::{extract_variables, normalize_line};
use crate::pdg::{LineId, Pdg, PdgEdge};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MergeError {
    #[error("edge #{edge} references unknown node {node}")]
    UnknownNode { edge: usize, node: u64 },
    #[error("node id {0} appears more than once")]
    DuplicateNode(u64),
}

/// Collapses statement vertices sharing a line into one node per line,
/// keeping every dependency between the lines they sit on.
///
/// Node text and variables are taken from `source`; lines past its end fall
/// back to the vertex code.
pub fn merge_line_nodes(raw: &RawDepGraph, source: &str) -> Result<Pdg, MergeError> {
    let mut line_of = BTreeMap::new();
    let mut code_of: BTreeMap<LineId, &str> = BTreeMap::new();
    for node in &raw.nodes {
        if line_of.insert(node.id, node.line).is_some() {
            return Err(MergeError::DuplicateNode(node.id));
        }
        code_of.entry(node.line).or_insert(node.code.as_str());
    }
    let mut edges = BTreeSet::new();
    for (idx, edge) in raw.edges.iter().enumerate() {
        let lookup = |node| line_of.get(&node).copied().ok_or(MergeError::UnknownNode { edge: idx, node });
        let (src, dst) = (lookup(edge.src)?, lookup(edge.dst)?);
        edges.insert(PdgEdge { src, dst, kind: edge.kind, variable: edge.variable.clone() });
    }
    let lines: Vec<&str> = source.lines().collect();
    let mut line_text = BTreeMap::new();
    let mut line_vars = BTreeMap::new();
    for (&line, code) in &code_of {
        let text = lines.get(line.get() as usize - 1).copied().unwrap_or(code);
        line_text.insert(line, normalize_line(text, false));
        line_vars.insert(line, extract_variables(text));
    }
    Ok(Pdg {
        function_id: raw.function_id.clone(),
        nodes: code_of.keys().copied().collect(),
        edges: edges.into_iter().collect(),
        line_text,
        line_vars,
    })
}
