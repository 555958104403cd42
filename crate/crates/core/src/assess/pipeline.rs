//! End-to-end assessment of one prediction and its rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::reach::{BenignSet, Distance, ReachError, ReachOptions};
use super::score::{trust_breakdown, ReachRecord};
use crate::lines::{benign_candidates, BenignVerdict, Ensemble, EnsembleError};
use crate::pdg::{build_weighted_pdg, Explanation, LineId, Pdg, PdgError};
use crate::same_major;

/// Version written into every assessment record.
pub const ASSESSMENT_SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Trustworthy,
    Untrustworthy,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Trustworthy => "trustworthy",
            Verdict::Untrustworthy => "untrustworthy",
        }
    }
}

#[derive(Debug, Error)]
pub enum AssessError {
    #[error("weighting: {0}")]
    Weighting(#[from] PdgError),
    #[error("line assessment: {0}")]
    Lines(#[from] EnsembleError),
    #[error("dependency assessment: {0}")]
    Dependencies(#[from] ReachError),
    #[error("threshold {0} is not a finite non-negative number")]
    Threshold(f64),
    #[error("unsupported assessment schema version `{0}`")]
    SchemaVersion(String),
    #[error("assessment document: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssessOptions {
    pub normalize_weights: bool,
    #[serde(flatten)]
    pub reach: ReachOptions,
}

impl Default for AssessOptions {
    fn default() -> Self {
        Self { normalize_weights: true, reach: ReachOptions::default() }
    }
}

/// Per-line detail for rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineDetail {
    pub line: LineId,
    pub text: String,
    pub weight: f64,
    pub benign: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<Distance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<LineId>,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub schema_version: String,
    pub function_id: String,
    pub trust_score: f64,
    pub threshold_used: f64,
    pub verdict: Verdict,
    pub degenerate: bool,
    pub records: Vec<ReachRecord>,
    pub benign: Vec<BenignVerdict>,
    pub lines: Vec<LineDetail>,
    /// Explanation lines with no node in the graph.
    pub dropped: Vec<LineId>,
    pub warnings: Vec<String>,
}

impl Assessment {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("assessments always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, AssessError> {
        let a: Assessment = serde_json::from_str(text)?;
        if !same_major(&a.schema_version, ASSESSMENT_SCHEMA_VERSION) {
            return Err(AssessError::SchemaVersion(a.schema_version));
        }
        Ok(a)
    }
}

pub fn verdict_for(trust_score: f64, threshold: f64) -> Verdict {
    if trust_score < threshold {
        Verdict::Untrustworthy
    } else {
        Verdict::Trustworthy
    }
}

/// Weights the graph, asks the ensemble which scored lines are benign
/// candidates, and scores the prediction. Untrustworthy when the score is
/// below `threshold`.
pub fn assess_prediction(
    expl: &Explanation,
    pdg: &Pdg,
    ensemble: &Ensemble,
    threshold: f64,
    opts: &AssessOptions,
) -> Result<Assessment, AssessError> {
    if !threshold.is_finite() || threshold < 0.0 {
        return Err(AssessError::Threshold(threshold));
    }
    let g = build_weighted_pdg(pdg, expl, opts.normalize_weights)?;
    let verdicts = benign_candidates(ensemble, expl, &pdg.line_text)?;
    let benign = BenignSet::new(&pdg.function_id, verdicts.values().filter(|v| v.is_benign_candidate).map(|v| v.line));
    let breakdown = trust_breakdown(expl, &g, &benign, opts.reach)?;

    let mut warnings = Vec::new();
    if expl.entries.is_empty() {
        warnings.push("empty explanation: no suspicious lines to assess".into());
    } else if g.weights.is_empty() {
        warnings.push("no explanation line is a node of the graph".into());
    }
    if !g.dropped.is_empty() {
        let listed: Vec<String> = g.dropped.iter().map(|l| l.to_string()).collect();
        warnings.push(format!("lines without a graph node were ignored: {}", listed.join(", ")));
    }
    if breakdown.degenerate {
        warnings.push("no scored line is a benign candidate; score is the sum of their weights".into());
    }

    let lines = g
        .weights
        .iter()
        .map(|(&line, &weight)| {
            let record = breakdown.records.iter().find(|r| r.line == line);
            LineDetail {
                line,
                text: pdg.line_text.get(&line).cloned().unwrap_or_default(),
                weight,
                benign: benign.contains(line),
                distance: record.map(|r| r.distance),
                target: record.and_then(|r| r.target),
                contribution: record.map_or(0.0, |r| r.contribution(weight)),
            }
        })
        .collect();
    Ok(Assessment {
        schema_version: ASSESSMENT_SCHEMA_VERSION.into(),
        function_id: pdg.function_id.clone(),
        trust_score: breakdown.trust_score,
        threshold_used: threshold,
        verdict: verdict_for(breakdown.trust_score, threshold),
        degenerate: breakdown.degenerate,
        records: breakdown.records,
        benign: verdicts.into_values().collect(),
        lines,
        dropped: g.dropped,
        warnings,
    })
}

/// Human-readable table of an assessment: one row per scored line, then
/// the total and the verdict.
pub fn render_assessment(a: &Assessment) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "function {}", a.function_id);
    let _ = writeln!(
        out,
        "{:>5}  {:>8}  {:>6}  {:>5}  {:>13}  {:>7}  text",
        "line", "weight", "benign", "votes", "distance", "contrib"
    );
    for d in &a.lines {
        let votes = a
            .benign
            .iter()
            .find(|v| v.line == d.line)
            .map(|v| v.votes.iter().map(u8::to_string).collect::<String>())
            .unwrap_or_else(|| "-".into());
        let distance = match (d.distance, d.target) {
            (Some(dist), Some(t)) => format!("{dist} (->{t})"),
            (Some(dist), None) => dist.to_string(),
            (None, _) => "-".into(),
        };
        let _ = writeln!(
            out,
            "{:>5}  {:>8.4}  {:>6}  {:>5}  {:>13}  {:>7.4}  {}",
            d.line.get(),
            d.weight,
            if d.benign { "yes" } else { "no" },
            votes,
            distance,
            d.contribution,
            d.text
        );
    }
    let _ = writeln!(
        out,
        "T = {:.6}  threshold = {}  verdict: {}{}",
        a.trust_score,
        a.threshold_used,
        a.verdict.as_str(),
        if a.degenerate { "  (degenerate)" } else { "" }
    );
    for w in &a.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}
