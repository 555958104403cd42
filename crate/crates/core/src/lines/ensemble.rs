//! Majority voting over line classifiers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::classifier::{ClassifyError, LineClassifier};
use crate::pdg::{Explanation, LineId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("no votes to combine")]
    Empty,
    #[error("vote {0} is not 0 or 1")]
    InvalidVote(u8),
    #[error("line {line}, classifier {classifier}: {source}")]
    Classify { line: LineId, classifier: String, source: ClassifyError },
}

/// 1 when at least half of the votes are 1.
pub fn ensemble_vote(votes: &[u8]) -> Result<u8, EnsembleError> {
    if votes.is_empty() {
        return Err(EnsembleError::Empty);
    }
    if let Some(&bad) = votes.iter().find(|&&v| v > 1) {
        return Err(EnsembleError::InvalidVote(bad));
    }
    let ones: usize = votes.iter().map(|&v| v as usize).sum();
    Ok(u8::from(2 * ones >= votes.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenignVerdict {
    pub line: LineId,
    pub votes: Vec<u8>,
    pub scores: Vec<f64>,
    pub is_benign_candidate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub members: Vec<LineClassifier>,
}

impl Ensemble {
    pub fn new(members: Vec<LineClassifier>) -> Self {
        Self { members }
    }

    pub fn judge(&self, line: LineId, text: &str) -> Result<BenignVerdict, EnsembleError> {
        let mut votes = Vec::with_capacity(self.members.len());
        let mut scores = Vec::with_capacity(self.members.len());
        for member in &self.members {
            let c = member.classify(text).map_err(|source| EnsembleError::Classify {
                line,
                classifier: member.name(),
                source,
            })?;
            votes.push(c.vote);
            scores.push(c.score);
        }
        let is_benign_candidate = ensemble_vote(&votes)? == 1;
        Ok(BenignVerdict { line, votes, scores, is_benign_candidate })
    }
}

/// Verdicts for the explanation lines that have text in `line_text`, that is,
/// the lines resident in the graph the text was taken from.
pub fn benign_candidates(
    ensemble: &Ensemble,
    expl: &Explanation,
    line_text: &BTreeMap<LineId, String>,
) -> Result<BTreeMap<LineId, BenignVerdict>, EnsembleError> {
    let mut out = BTreeMap::new();
    for line in expl.lines() {
        if let Some(text) = line_text.get(&line) {
            out.insert(line, ensemble.judge(line, text)?);
        }
    }
    Ok(out)
}
