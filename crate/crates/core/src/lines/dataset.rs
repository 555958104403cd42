//! Historical line dataset: corpus records, vulnerable-line extraction,
//! negative sampling and BLEU filtering.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::bleu::ReferenceSet;
use super::diff::{extract_vulnerable_lines, DiffError};
use crate::frontend::{is_code_line, normalize_line, tokenize_line};
use crate::pdg::{ExplanationEntry, LineId};

/// Version written into every dataset store.
pub const DATASET_SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("record {record}: {message}")]
    Record { record: usize, message: String },
    #[error("record {record}: {source}")]
    Diff { record: usize, source: DiffError },
    #[error("only {available} eligible lines, {requested} requested")]
    InsufficientData { available: usize, requested: usize },
    #[error("sample size must be at least 1")]
    ZeroSample,
    #[error("threshold {0} outside (0, 1]")]
    Threshold(f64),
    #[error("line normalizes to nothing")]
    EmptyLine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Vulnerable,
    #[serde(alias = "non-vulnerable")]
    NonVulnerable,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Origin {
    pub corpus: String,
    pub function_id: String,
    pub line: LineId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineSample {
    pub text: String,
    pub label: Label,
    pub origin: Origin,
}

impl LineSample {
    /// Normalizes `raw` and rejects lines that normalize to nothing.
    pub fn new(raw: &str, label: Label, origin: Origin, alpha_rename: bool) -> Result<Self, DatasetError> {
        let text = normalize_line(raw, alpha_rename);
        if text.is_empty() {
            return Err(DatasetError::EmptyLine);
        }
        Ok(Self { text, label, origin })
    }

    pub fn tokens(&self) -> Vec<String> {
        tokenize_line(&self.text).into_iter().map(|t| t.text).collect()
    }
}

/// One function of a JSONL corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionRecord {
    pub function_id: String,
    pub source: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diff: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vul_lines: Option<Vec<LineId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<Vec<ExplanationEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl FunctionRecord {
    /// Ground-truth vulnerable lines: `vul_lines` if given, else the lines
    /// the fixing diff deletes or modifies. `None` when neither is present.
    pub fn vulnerable_lines(&self) -> Result<Option<BTreeSet<LineId>>, DiffError> {
        if let Some(lines) = &self.vul_lines {
            return Ok(Some(lines.iter().copied().collect()));
        }
        self.diff.as_deref().map(|d| extract_vulnerable_lines(&self.source, d)).transpose()
    }
}

/// Parses a JSONL corpus. Blank lines are skipped; records are numbered
/// from 1 by their line in the file.
pub fn read_corpus(text: &str) -> Result<Vec<FunctionRecord>, DatasetError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: FunctionRecord =
            serde_json::from_str(line).map_err(|e| DatasetError::Record { record: idx + 1, message: e.to_string() })?;
        if record.function_id.is_empty() {
            return Err(DatasetError::Record { record: idx + 1, message: "empty function_id".into() });
        }
        out.push(record);
    }
    Ok(out)
}

fn source_line(source: &str, line: LineId) -> Option<&str> {
    source.lines().nth(line.get() as usize - 1)
}

/// Vulnerable line samples from every vulnerable record of the corpus.
pub fn vulnerable_samples(
    records: &[FunctionRecord],
    corpus: &str,
    alpha_rename: bool,
) -> Result<Vec<LineSample>, DatasetError> {
    let mut out = Vec::new();
    for (idx, record) in records.iter().enumerate() {
        if record.label != Label::Vulnerable {
            continue;
        }
        let lines = record
            .vulnerable_lines()
            .map_err(|source| DatasetError::Diff { record: idx + 1, source })?
            .unwrap_or_default();
        for line in lines {
            let Some(raw) = source_line(&record.source, line) else {
                return Err(DatasetError::Record {
                    record: idx + 1,
                    message: format!("vulnerable line {line} is past the end of the source"),
                });
            };
            if !is_code_line(raw) {
                continue;
            }
            let origin = Origin { corpus: corpus.into(), function_id: record.function_id.clone(), line };
            out.push(LineSample::new(raw, Label::Vulnerable, origin, alpha_rename)?);
        }
    }
    Ok(out)
}

/// Samples `n` distinct code lines uniformly from the non-vulnerable
/// functions of the corpus. The draw depends only on `seed` and the corpus.
pub fn sample_candidate_negatives(
    records: &[FunctionRecord],
    corpus: &str,
    n: usize,
    seed: u64,
    alpha_rename: bool,
) -> Result<Vec<LineSample>, DatasetError> {
    if n == 0 {
        return Err(DatasetError::ZeroSample);
    }
    let eligible: Vec<(&FunctionRecord, LineId, &str)> = records
        .iter()
        .filter(|r| r.label == Label::NonVulnerable)
        .flat_map(|r| {
            r.source
                .lines()
                .enumerate()
                .filter(|(_, text)| is_code_line(text))
                .map(move |(i, text)| (r, LineId::new(i as u32 + 1).expect("1-based"), text))
        })
        .collect();
    if eligible.len() < n {
        return Err(DatasetError::InsufficientData { available: eligible.len(), requested: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, eligible.len(), n).into_vec();
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|i| {
            let (record, line, text) = eligible[i];
            let origin = Origin { corpus: corpus.into(), function_id: record.function_id.clone(), line };
            LineSample::new(text, Label::NonVulnerable, origin, alpha_rename)
        })
        .collect()
}

/// Keeps the candidates whose BLEU against all vulnerable lines is strictly
/// below `threshold`, relabelled non-vulnerable.
pub fn filter_negatives(
    candidates: &[LineSample],
    vulnerable: &[LineSample],
    threshold: f64,
    max_order: usize,
) -> Result<Vec<LineSample>, DatasetError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(DatasetError::Threshold(threshold));
    }
    let references: Vec<Vec<String>> = vulnerable.iter().map(LineSample::tokens).collect();
    let set = ReferenceSet::new(&references, max_order.max(1)).expect("order is positive");
    let mut out = Vec::new();
    for candidate in candidates {
        let tokens = candidate.tokens();
        let score = set.score(&tokens).map_err(|_| DatasetError::EmptyLine)?;
        if score < threshold {
            out.push(LineSample { label: Label::NonVulnerable, ..candidate.clone() });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetParams {
    pub neg_ratio: f64,
    pub bleu_threshold: f64,
    pub bleu_order: usize,
    pub seed: u64,
    pub alpha_rename: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub functions: usize,
    pub vulnerable: usize,
    pub candidate_negatives: usize,
    pub bleu_filtered: usize,
    pub negatives: usize,
    pub warnings: Vec<String>,
}

/// The persisted line dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStore {
    pub schema_version: String,
    pub params: DatasetParams,
    pub summary: IngestSummary,
    pub samples: Vec<LineSample>,
}

/// Builds the line dataset: vulnerable lines, `neg_ratio` times as many
/// sampled negatives, minus those too similar to a vulnerable line.
///
/// When the corpus has fewer eligible negative lines than requested, all of
/// them are used and a warning is recorded.
pub fn build_dataset(
    records: &[FunctionRecord],
    corpus: &str,
    params: &DatasetParams,
) -> Result<DatasetStore, DatasetError> {
    let mut summary = IngestSummary { functions: records.len(), ..Default::default() };
    if records.is_empty() {
        summary.warnings.push("corpus is empty".into());
    }
    let vulnerable = vulnerable_samples(records, corpus, params.alpha_rename)?;
    summary.vulnerable = vulnerable.len();
    let wanted = (vulnerable.len() as f64 * params.neg_ratio).round() as usize;
    let candidates = match sample_candidate_negatives(records, corpus, wanted, params.seed, params.alpha_rename) {
        Ok(c) => c,
        Err(DatasetError::ZeroSample) => Vec::new(),
        Err(DatasetError::InsufficientData { available, requested }) => {
            summary
                .warnings
                .push(format!("only {available} eligible negative lines for {requested} requested; using all"));
            if available == 0 {
                Vec::new()
            } else {
                sample_candidate_negatives(records, corpus, available, params.seed, params.alpha_rename)?
            }
        }
        Err(e) => return Err(e),
    };
    summary.candidate_negatives = candidates.len();
    let negatives = filter_negatives(&candidates, &vulnerable, params.bleu_threshold, params.bleu_order)?;
    summary.bleu_filtered = candidates.len() - negatives.len();
    summary.negatives = negatives.len();
    let mut samples = vulnerable;
    samples.extend(negatives);
    Ok(DatasetStore { schema_version: DATASET_SCHEMA_VERSION.into(), params: params.clone(), summary, samples })
}
