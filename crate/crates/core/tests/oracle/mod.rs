//! Independent reference implementations used to cross-check the library.
#![allow(dead_code)]

pub mod synth;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use vulntrust_core::assess::BenignSet;
use vulntrust_core::{build_weighted_pdg, DepKind, Explanation, LineId, Pdg, PdgEdge, WeightedPdg};

const VARS: [&str; 3] = ["a", "b", "c"];

pub struct RandomCase {
    pub expl: Explanation,
    pub g: WeightedPdg,
    pub benign: BenignSet,
}

pub fn l(n: u32) -> LineId {
    LineId::new(n).unwrap()
}

/// A graph of at most 12 lines and 30 edges with random variables, a random
/// scored subset of lines and a random benign subset of those.
pub fn random_case<R: Rng>(rng: &mut R) -> RandomCase {
    let n = rng.gen_range(1..=12u32);
    let m = rng.gen_range(0..=30usize);
    let nodes: Vec<LineId> = (1..=n).map(l).collect();
    let mut edges = BTreeSet::new();
    for _ in 0..m {
        let src = l(rng.gen_range(1..=n));
        let dst = l(rng.gen_range(1..=n));
        if rng.gen_bool(0.5) {
            edges.insert(PdgEdge::control(src, dst));
        } else {
            edges.insert(PdgEdge::data(src, dst, VARS[rng.gen_range(0..VARS.len())]));
        }
    }
    let line_vars = nodes
        .iter()
        .map(|&v| (v, VARS.iter().filter(|_| rng.gen_bool(0.5)).map(|s| s.to_string()).collect()))
        .collect();
    let pdg = Pdg {
        function_id: "rand".into(),
        line_text: nodes.iter().map(|&v| (v, format!("s{v} ;"))).collect(),
        nodes: nodes.clone(),
        edges: edges.into_iter().collect(),
        line_vars,
    };
    let mut scored = Vec::new();
    for v in 1..=n {
        if rng.gen_bool(0.7) {
            scored.push((v, rng.gen_range(0..100) as f64 / 100.0));
        }
    }
    let benign = BenignSet::new("rand", scored.iter().filter(|_| rng.gen_bool(0.5)).map(|&(v, _)| l(v)));
    let expl = Explanation::new("rand", rng.gen_range(0.0..=1.0), scored).unwrap();
    let g = build_weighted_pdg(&pdg, &expl, rng.gen_bool(0.5)).unwrap();
    RandomCase { expl, g, benign }
}

fn is_target(case: &RandomCase, z: LineId) -> bool {
    case.g.weights.contains_key(&z) && !case.benign.contains(z)
}

/// Lines `z` reached from `y` by some sequence of zero or more edges,
/// found by enumerating simple paths depth-first.
fn sequence_ends(g: &WeightedPdg, y: LineId, data_only: bool) -> BTreeSet<LineId> {
    fn walk(g: &WeightedPdg, at: LineId, data_only: bool, path: &mut Vec<LineId>, ends: &mut BTreeSet<LineId>) {
        ends.insert(at);
        for e in &g.pdg.edges {
            if e.src == at && !path.contains(&e.dst) && (!data_only || e.kind == DepKind::Data) {
                path.push(e.dst);
                walk(g, e.dst, data_only, path, ends);
                path.pop();
            }
        }
    }
    let mut ends = BTreeSet::new();
    walk(g, y, data_only, &mut vec![y], &mut ends);
    ends
}

/// The dependency rule read literally off its definition.
pub fn oracle_vulnerable(case: &RandomCase, edge: &PdgEdge, data_only: bool) -> bool {
    let ends = sequence_ends(&case.g, edge.dst, data_only && edge.kind == DepKind::Data);
    ends.into_iter().any(|z| {
        is_target(case, z)
            && match edge.kind {
                DepKind::Control => true,
                DepKind::Data => {
                    let var = edge.variable.as_deref().unwrap();
                    case.g.pdg.line_vars[&z].contains(var)
                }
            }
    })
}

/// Shortest vulnerable path lengths from `start`, by exhaustive enumeration
/// of every simple path whose edges are all vulnerable.
pub fn oracle_distances(case: &RandomCase, start: LineId) -> BTreeMap<LineId, u32> {
    let vulnerable: Vec<&PdgEdge> = case.g.pdg.edges.iter().filter(|e| oracle_vulnerable(case, e, false)).collect();
    fn walk(edges: &[&PdgEdge], at: LineId, path: &mut Vec<LineId>, best: &mut BTreeMap<LineId, u32>) {
        let len = path.len() as u32 - 1;
        let slot = best.entry(at).or_insert(len);
        *slot = (*slot).min(len);
        for e in edges {
            if e.src == at && !path.contains(&e.dst) {
                path.push(e.dst);
                walk(edges, e.dst, path, best);
                path.pop();
            }
        }
    }
    let mut best = BTreeMap::new();
    walk(&vulnerable, start, &mut vec![start], &mut best);
    best
}

fn counts(tokens: &[&str], n: usize) -> HashMap<Vec<String>, usize> {
    let mut out = HashMap::new();
    let mut i = 0;
    while i + n <= tokens.len() {
        let gram: Vec<String> = tokens[i..i + n].iter().map(|s| s.to_string()).collect();
        *out.entry(gram).or_insert(0) += 1;
        i += 1;
    }
    out
}

/// Textbook BLEU: clipped counts against each reference separately, maximum
/// taken per n-gram, epsilon for zero matches, closest-length brevity.
pub fn textbook_bleu(candidate: &[&str], references: &[Vec<&str>], max_order: usize) -> f64 {
    if references.is_empty() {
        return 0.0;
    }
    let mut logs = Vec::new();
    for n in 1..=max_order {
        let cand = counts(candidate, n);
        let total: usize = cand.values().sum();
        if total == 0 {
            continue;
        }
        let mut clipped = 0;
        for (gram, &c) in &cand {
            let mut max_ref = 0;
            for r in references {
                max_ref = max_ref.max(counts(r, n).get(gram).copied().unwrap_or(0));
            }
            clipped += c.min(max_ref);
        }
        let p = if clipped == 0 { 1e-9 / total as f64 } else { clipped as f64 / total as f64 };
        logs.push(p.ln());
    }
    let c = candidate.len();
    let mut r = references[0].len();
    for reference in references {
        let d = reference.len().abs_diff(c);
        if d < r.abs_diff(c) || (d == r.abs_diff(c) && reference.len() < r) {
            r = reference.len();
        }
    }
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    bp * (logs.iter().sum::<f64>() / logs.len() as f64).exp()
}
