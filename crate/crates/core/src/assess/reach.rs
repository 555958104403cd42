//! Vulnerable dependencies and vulnerability-reachability distance.
//!
//! A dependency `x -> y` is vulnerable when some line `z` reachable from `y`
//! (possibly `y` itself) is a non-benign target. For a data dependency the
//! target must also involve the edge's variable. Distances count edges on the
//! shortest path made only of vulnerable dependencies.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::pdg::{DepKind, LineId, PdgEdge, WeightedPdg};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReachError {
    #[error("edge {src}->{dst} is not in the graph")]
    UnknownEdge { src: LineId, dst: LineId },
    #[error("line {0} is not a node of the graph")]
    UnknownLine(LineId),
    #[error("line {0} is not a benign candidate")]
    NotBenign(LineId),
    #[error("benign line {0} is not a scored line of the graph")]
    BenignNotResident(LineId),
    #[error("benign set is for `{benign}` but graph is for `{graph}`")]
    IdentityMismatch { graph: String, benign: String },
}

/// Lines the classifier ensemble judged benign candidates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenignSet {
    pub function_id: String,
    pub members: BTreeSet<LineId>,
}

impl BenignSet {
    pub fn new(function_id: impl Into<String>, members: impl IntoIterator<Item = LineId>) -> Self {
        Self { function_id: function_id.into(), members: members.into_iter().collect() }
    }

    pub fn contains(&self, line: LineId) -> bool {
        self.members.contains(&line)
    }
}

/// How a data dependency's variable must relate to the non-benign target.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataRule {
    /// The target line mentions the variable; the path to it may use any
    /// dependencies.
    #[default]
    Direct,
    /// The target line mentions the variable and is reached from the edge's
    /// destination through data dependencies only.
    TransitiveFlow,
}

/// Which non-benign lines count as targets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetScope {
    /// Scored lines of the graph outside the benign set.
    #[default]
    Suspicious,
    /// Every graph line outside the benign set.
    AnyLine,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReachOptions {
    pub data_rule: DataRule,
    pub target_scope: TargetScope,
}

/// Vulnerability-reachability distance; `Infinite` when no path exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Distance {
    Finite(u32),
    Infinite,
}

impl Distance {
    pub fn finite(self) -> Option<u32> {
        match self {
            Distance::Finite(d) => Some(d),
            Distance::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Distance::Finite(_))
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distance::Finite(d) => write!(f, "{d}"),
            Distance::Infinite => f.write_str("∞"),
        }
    }
}

impl Serialize for Distance {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Distance::Finite(d) => s.serialize_u32(*d),
            Distance::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Distance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            N(u32),
            S(String),
        }
        match Repr::deserialize(d)? {
            Repr::N(n) => Ok(Distance::Finite(n)),
            Repr::S(s) if s == "inf" => Ok(Distance::Infinite),
            Repr::S(s) => Err(serde::de::Error::custom(format!("bad distance `{s}`"))),
        }
    }
}

/// Vulnerability flags for every edge of a weighted graph under one benign
/// set, plus the subgraph of vulnerable edges for distance queries.
#[derive(Debug, Clone)]
pub struct DependencyAnalysis<'a> {
    g: &'a WeightedPdg,
    benign: &'a BenignSet,
    index: BTreeMap<LineId, usize>,
    vulnerable: Vec<bool>,
    /// Vulnerable successors per node, self-loops removed.
    forward: Vec<Vec<usize>>,
}

fn closure(n: usize, adj: &[Vec<usize>]) -> Vec<Vec<bool>> {
    (0..n)
        .map(|s| {
            let mut seen = vec![false; n];
            seen[s] = true;
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            seen
        })
        .collect()
}

impl<'a> DependencyAnalysis<'a> {
    pub fn new(g: &'a WeightedPdg, benign: &'a BenignSet, opts: ReachOptions) -> Result<Self, ReachError> {
        if benign.function_id != g.pdg.function_id {
            return Err(ReachError::IdentityMismatch {
                graph: g.pdg.function_id.clone(),
                benign: benign.function_id.clone(),
            });
        }
        if let Some(&stray) = benign.members.iter().find(|l| !g.weights.contains_key(l)) {
            return Err(ReachError::BenignNotResident(stray));
        }
        let index: BTreeMap<LineId, usize> = g.pdg.node_set().into_iter().enumerate().map(|(i, l)| (l, i)).collect();
        let lines: Vec<LineId> = index.keys().copied().collect();
        let n = lines.len();
        let mut any = vec![Vec::new(); n];
        let mut data = vec![Vec::new(); n];
        for e in &g.pdg.edges {
            let (Some(&s), Some(&d)) = (index.get(&e.src), index.get(&e.dst)) else {
                return Err(ReachError::UnknownEdge { src: e.src, dst: e.dst });
            };
            any[s].push(d);
            if e.kind == DepKind::Data {
                data[s].push(d);
            }
        }
        let reach_any = closure(n, &any);
        let reach_data = match opts.data_rule {
            DataRule::Direct => Vec::new(),
            DataRule::TransitiveFlow => closure(n, &data),
        };
        let is_target: Vec<bool> = lines
            .iter()
            .map(|l| {
                !benign.contains(*l)
                    && match opts.target_scope {
                        TargetScope::Suspicious => g.weights.contains_key(l),
                        TargetScope::AnyLine => true,
                    }
            })
            .collect();
        let involves = |z: usize, var: &str| g.pdg.vars(lines[z]).is_some_and(|vs| vs.contains(var));

        let mut vulnerable = Vec::with_capacity(g.pdg.edges.len());
        let mut forward = vec![Vec::new(); n];
        for e in &g.pdg.edges {
            let (s, y) = (index[&e.src], index[&e.dst]);
            let hit = match e.kind {
                DepKind::Control => (0..n).any(|z| reach_any[y][z] && is_target[z]),
                DepKind::Data => {
                    let var = e.variable.as_deref().unwrap_or_default();
                    let reach = match opts.data_rule {
                        DataRule::Direct => &reach_any[y],
                        DataRule::TransitiveFlow => &reach_data[y],
                    };
                    (0..n).any(|z| reach[z] && is_target[z] && involves(z, var))
                }
            };
            vulnerable.push(hit);
            if hit && s != y && !forward[s].contains(&y) {
                forward[s].push(y);
            }
        }
        Ok(Self { g, benign, index, vulnerable, forward })
    }

    fn edge_position(&self, edge: &PdgEdge) -> Result<usize, ReachError> {
        self.g.pdg.edges.iter().position(|e| e == edge).ok_or(ReachError::UnknownEdge { src: edge.src, dst: edge.dst })
    }

    pub fn is_vulnerable(&self, edge: &PdgEdge) -> Result<bool, ReachError> {
        Ok(self.vulnerable[self.edge_position(edge)?])
    }

    /// The edges flagged vulnerable, in graph order.
    pub fn vulnerable_edges(&self) -> impl Iterator<Item = &PdgEdge> {
        self.g.pdg.edges.iter().zip(&self.vulnerable).filter(|(_, &v)| v).map(|(e, _)| e)
    }

    /// Breadth-first distances from a benign `start` to every line it reaches
    /// over vulnerable dependencies, `start` included at 0.
    pub fn distances_from(&self, start: LineId) -> Result<BTreeMap<LineId, u32>, ReachError> {
        if !self.benign.contains(start) {
            return Err(ReachError::NotBenign(start));
        }
        let lines: Vec<LineId> = self.index.keys().copied().collect();
        let s = self.index[&start];
        let mut dist = vec![u32::MAX; lines.len()];
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &v in &self.forward[u] {
                if dist[v] == u32::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        Ok(dist.into_iter().enumerate().filter(|&(_, d)| d != u32::MAX).map(|(i, d)| (lines[i], d)).collect())
    }

    pub fn distance(&self, start: LineId, target: LineId) -> Result<Distance, ReachError> {
        if !self.index.contains_key(&target) {
            return Err(ReachError::UnknownLine(target));
        }
        Ok(self.distances_from(start)?.get(&target).map_or(Distance::Infinite, |&d| Distance::Finite(d)))
    }
}

pub fn is_vulnerable_dependency(
    edge: &PdgEdge,
    g: &WeightedPdg,
    benign: &BenignSet,
    opts: ReachOptions,
) -> Result<bool, ReachError> {
    DependencyAnalysis::new(g, benign, opts)?.is_vulnerable(edge)
}

pub fn reachability_distance(
    start: LineId,
    target: LineId,
    g: &WeightedPdg,
    benign: &BenignSet,
    opts: ReachOptions,
) -> Result<Distance, ReachError> {
    DependencyAnalysis::new(g, benign, opts)?.distance(start, target)
}
