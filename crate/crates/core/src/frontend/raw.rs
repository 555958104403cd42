use serde::{Deserialize, Serialize};

use crate::pdg::{DepKind, LineId};

/// A statement-level vertex before line merging. Several nodes may share a
/// line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawNode {
    pub id: u64,
    pub line: LineId,
    pub code: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RawEdge {
    pub src: u64,
    pub dst: u64,
    pub kind: DepKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variable: Option<String>,
}

/// Dependence graph over statement vertices, as produced by the native
/// parser or imported from an external analysis platform.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RawDepGraph {
    pub function_id: String,
    pub nodes: Vec<RawNode>,
    pub edges: Vec<RawEdge>,
}

impl RawDepGraph {
    pub fn node(&self, id: u64) -> Option<&RawNode> {
        self.nodes.iter().find(|n| n.id == id)
    }
}
