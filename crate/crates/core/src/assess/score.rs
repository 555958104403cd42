//! Nearest non-benign targets and the trustworthiness score.

use serde::{Deserialize, Serialize};

use super::reach::{BenignSet, DependencyAnalysis, Distance, ReachError, ReachOptions};
use crate::pdg::{Explanation, LineId, WeightedPdg};

/// Where a benign candidate's nearest non-benign suspicious line lies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReachRecord {
    pub line: LineId,
    pub distance: Distance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<LineId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_score: Option<f64>,
}

impl ReachRecord {
    fn unreachable(line: LineId) -> Self {
        Self { line, distance: Distance::Infinite, target: None, target_score: None }
    }

    /// `(s_l + s_target) / distance`, or 0 when no target is reachable.
    pub fn contribution(&self, score: f64) -> f64 {
        match (self.distance, self.target_score) {
            (Distance::Finite(d), Some(ts)) if d > 0 => (score + ts) / d as f64,
            _ => 0.0,
        }
    }
}

/// Picks, among the non-benign scored lines other than `l`, the one closest
/// to `l` over vulnerable dependencies. Ties go to the larger weight, then to
/// the smaller line number.
pub fn nearest_in(
    analysis: &DependencyAnalysis<'_>,
    l: LineId,
    expl: &Explanation,
    g: &WeightedPdg,
    benign: &BenignSet,
) -> Result<ReachRecord, ReachError> {
    let dist = analysis.distances_from(l)?;
    let mut best: Option<(u32, f64, LineId)> = None;
    for target in expl.lines() {
        if target == l || benign.contains(target) {
            continue;
        }
        let (Some(&d), Some(w)) = (dist.get(&target), g.weight(target)) else { continue };
        let better = match best {
            None => true,
            Some((bd, bw, bl)) => d < bd || (d == bd && (w > bw || (w == bw && target < bl))),
        };
        if better {
            best = Some((d, w, target));
        }
    }
    Ok(match best {
        Some((d, w, t)) => {
            ReachRecord { line: l, distance: Distance::Finite(d), target: Some(t), target_score: Some(w) }
        }
        None => ReachRecord::unreachable(l),
    })
}

pub fn nearest_non_benign(
    l: LineId,
    expl: &Explanation,
    g: &WeightedPdg,
    benign: &BenignSet,
    opts: ReachOptions,
) -> Result<ReachRecord, ReachError> {
    let analysis = DependencyAnalysis::new(g, benign, opts)?;
    nearest_in(&analysis, l, expl, g, benign)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustBreakdown {
    pub trust_score: f64,
    /// One record per benign candidate, in line order.
    pub records: Vec<ReachRecord>,
    /// Set when no scored line is a benign candidate and the score falls back
    /// to the sum of the scored lines' weights.
    pub degenerate: bool,
}

/// Sum over benign candidates of `(s_l + s_target) / distance`, skipping
/// candidates with no reachable target. When every scored graph line is
/// non-benign the score is the sum of their weights instead.
pub fn trust_breakdown(
    expl: &Explanation,
    g: &WeightedPdg,
    benign: &BenignSet,
    opts: ReachOptions,
) -> Result<TrustBreakdown, ReachError> {
    let analysis = DependencyAnalysis::new(g, benign, opts)?;
    let resident = g.resident();
    if !resident.is_empty() && resident.iter().all(|l| !benign.contains(*l)) {
        return Ok(TrustBreakdown { trust_score: g.weights.values().sum(), records: Vec::new(), degenerate: true });
    }
    let mut trust_score = 0.0;
    let mut records = Vec::new();
    for &l in &benign.members {
        let record = nearest_in(&analysis, l, expl, g, benign)?;
        trust_score += record.contribution(g.weight(l).unwrap_or(0.0));
        records.push(record);
    }
    Ok(TrustBreakdown { trust_score, records, degenerate: false })
}

pub fn trust_score(
    expl: &Explanation,
    g: &WeightedPdg,
    benign: &BenignSet,
    opts: ReachOptions,
) -> Result<f64, ReachError> {
    Ok(trust_breakdown(expl, g, benign, opts)?.trust_score)
}
