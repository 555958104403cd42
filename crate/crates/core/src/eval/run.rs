//! Corpus-level evaluation: assess every prediction, label it against its
//! ground truth, fit thresholds on a calibration slice and tabulate metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::metrics::{
    auc, calibrate_threshold, iou, label_ground_truth, select_suspicious, Confusion, Metrics, MetricsError, Orientation,
};
use crate::assess::{assess_prediction, AssessError, AssessOptions, Verdict};
use crate::frontend::build_pdg;
use crate::lines::{Ensemble, FunctionRecord};
use crate::pdg::{Explanation, LineId, Pdg};

/// Version written into every evaluation report.
pub const REPORT_SCHEMA_VERSION: &str = "1.0";

pub const METHOD_TRUST: &str = "trust";
pub const METHOD_NAIVE: &str = "naive";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("record {record} (`{function_id}`): {message}")]
    Record { record: usize, function_id: String, message: String },
    #[error("record {record} (`{function_id}`): {source}")]
    Assess { record: usize, function_id: String, source: AssessError },
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// First entry is the primary threshold used for the per-record dump.
    pub iou_thresholds: Vec<f64>,
    pub top_k: usize,
    pub trust_threshold: Option<f64>,
    pub naive_threshold: Option<f64>,
    pub calibration_fraction: f64,
    pub seed: u64,
    pub assess: AssessOptions,
    pub workers: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_thresholds: vec![0.5],
            top_k: 10,
            trust_threshold: None,
            naive_threshold: None,
            calibration_fraction: 0.2,
            seed: 0,
            assess: AssessOptions::default(),
            workers: None,
        }
    }
}

/// The explanation cut down to its `top_k` best-scored graph lines.
pub fn truncate_explanation(expl: &Explanation, pdg: &Pdg, top_k: usize) -> Explanation {
    let resident = expl.restricted_to(&pdg.node_set());
    resident.restricted_to(&select_suspicious(&resident, top_k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Calibration,
    Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub function_id: String,
    pub split: Split,
    pub iou: f64,
    pub gt_label: Verdict,
    pub scores: BTreeMap<String, f64>,
    pub verdicts: BTreeMap<String, Verdict>,
    pub suspicious: Vec<LineId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    pub threshold: f64,
    /// True when the threshold was fitted on the calibration slice.
    pub calibrated: bool,
    pub confusion: Confusion,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub iou_threshold: f64,
    /// Ground-truth untrustworthy predictions over all assessed records.
    pub untrustworthy: usize,
    pub evaluated: usize,
    pub rows: Vec<MethodRow>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedRecord {
    pub record: usize,
    pub function_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: String,
    pub config: EvalConfig,
    pub assessed: usize,
    pub skipped: Vec<SkippedRecord>,
    pub tables: Vec<MetricsTable>,
    pub records: Vec<EvalRecord>,
}

struct Assessed {
    function_id: String,
    iou: f64,
    trust: f64,
    confidence: f64,
    suspicious: BTreeSet<LineId>,
}

enum Outcome {
    Done(Assessed),
    Skipped(SkippedRecord),
}

fn assess_record(
    idx: usize,
    record: &FunctionRecord,
    ensemble: &Ensemble,
    cfg: &EvalConfig,
) -> Result<Outcome, EvalError> {
    let fail =
        |message: String| EvalError::Record { record: idx + 1, function_id: record.function_id.clone(), message };
    let truth = record
        .vulnerable_lines()
        .map_err(|e| fail(e.to_string()))?
        .filter(|t| !t.is_empty())
        .ok_or_else(|| fail("no ground-truth vulnerable lines (vul_lines or diff)".into()))?;
    let entries = record.explanation.clone().ok_or_else(|| fail("no explanation".into()))?;
    let confidence = record.confidence.ok_or_else(|| fail("no confidence".into()))?;
    let mut pdg = match build_pdg(&record.source) {
        Ok(p) => p,
        Err(e) => {
            return Ok(Outcome::Skipped(SkippedRecord {
                record: idx + 1,
                function_id: record.function_id.clone(),
                reason: e.to_string(),
            }))
        }
    };
    pdg.function_id = record.function_id.clone();
    let expl = Explanation { function_id: record.function_id.clone(), confidence, entries };
    expl.validate().map_err(|e| fail(e.to_string()))?;
    let expl = truncate_explanation(&expl, &pdg, cfg.top_k);
    let assessment = assess_prediction(&expl, &pdg, ensemble, 0.0, &cfg.assess)
        .map_err(|source| EvalError::Assess { record: idx + 1, function_id: record.function_id.clone(), source })?;
    let suspicious: BTreeSet<LineId> = expl.lines().collect();
    Ok(Outcome::Done(Assessed {
        function_id: record.function_id.clone(),
        iou: iou(&suspicious, &truth).map_err(|e| fail(e.to_string()))?,
        trust: assessment.trust_score,
        confidence,
        suspicious,
    }))
}

fn fit(name: &str, fixed: Option<f64>, scores: &[f64], labels: &[Verdict], warnings: &mut Vec<String>) -> (f64, bool) {
    if let Some(t) = fixed {
        return (t, false);
    }
    match calibrate_threshold(scores, labels, Orientation::LowerIsPositive) {
        Ok(c) => {
            if c.degenerate {
                warnings.push(format!("{name}: no threshold separates the calibration labels"));
            }
            (c.threshold, true)
        }
        Err(MetricsError::SingleClass) => {
            warnings.push(format!("{name}: calibration slice has a single label; threshold defaults to 0.5"));
            (0.5, false)
        }
        Err(e) => {
            warnings.push(format!("{name}: {e}; threshold defaults to 0.5"));
            (0.5, false)
        }
    }
}

fn row(method: &str, threshold: f64, calibrated: bool, scores: &[f64], labels: &[Verdict]) -> MethodRow {
    let predicted: Vec<Verdict> = scores.iter().map(|&s| Orientation::LowerIsPositive.classify(s, threshold)).collect();
    let confusion = Confusion::from_pairs(labels, &predicted);
    let metrics = Metrics::from_confusion(&confusion, auc(scores, labels, Orientation::LowerIsPositive));
    MethodRow { method: method.into(), threshold, calibrated, confusion, metrics }
}

/// Assesses every record and reports metrics per IoU threshold.
///
/// Records the native parser rejects are skipped and listed. Thresholds not
/// fixed in `cfg` are fitted by G-mean on a seeded calibration slice of
/// `calibration_fraction` of the records, and metrics cover the rest; when
/// both thresholds are fixed every record is evaluated.
pub fn run_evaluation(
    records: &[FunctionRecord],
    ensemble: &Ensemble,
    cfg: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| EvalError::Pool(e.to_string()))?;
    let outcomes: Vec<Outcome> = pool.install(|| {
        records.par_iter().enumerate().map(|(i, r)| assess_record(i, r, ensemble, cfg)).collect::<Result<_, _>>()
    })?;
    let mut assessed = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Done(a) => assessed.push(a),
            Outcome::Skipped(s) => skipped.push(s),
        }
    }

    let needs_calibration = cfg.trust_threshold.is_none() || cfg.naive_threshold.is_none();
    let mut split = vec![Split::Evaluation; assessed.len()];
    if needs_calibration && assessed.len() > 1 {
        let mut order: Vec<usize> = (0..assessed.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
        let n_cal = ((assessed.len() as f64 * cfg.calibration_fraction).ceil() as usize).min(assessed.len() - 1);
        for &i in &order[..n_cal] {
            split[i] = Split::Calibration;
        }
    }
    let pick = |which: Split| -> Vec<usize> { (0..assessed.len()).filter(|&i| split[i] == which).collect() };
    let (cal, eval) = (pick(Split::Calibration), pick(Split::Evaluation));

    let mut tables = Vec::new();
    let mut primary = None;
    for &threshold in &cfg.iou_thresholds {
        let labels: Vec<Verdict> = assessed.iter().map(|a| label_ground_truth(a.iou, threshold)).collect();
        let gather = |idx: &[usize], f: &dyn Fn(&Assessed) -> f64| -> (Vec<f64>, Vec<Verdict>) {
            (idx.iter().map(|&i| f(&assessed[i])).collect(), idx.iter().map(|&i| labels[i]).collect())
        };
        let mut warnings = Vec::new();
        let (cal_t, cal_l) = gather(&cal, &|a| a.trust);
        let (trust_t, trust_cal) = fit(METHOD_TRUST, cfg.trust_threshold, &cal_t, &cal_l, &mut warnings);
        let (cal_c, _) = gather(&cal, &|a| a.confidence);
        let (naive_t, naive_cal) = fit(METHOD_NAIVE, cfg.naive_threshold, &cal_c, &cal_l, &mut warnings);
        let (ev_t, ev_l) = gather(&eval, &|a| a.trust);
        let (ev_c, _) = gather(&eval, &|a| a.confidence);
        if eval.len() < 2 {
            warnings.push(format!("only {} evaluated record(s); AUC and several ratios are undefined", eval.len()));
        }
        tables.push(MetricsTable {
            iou_threshold: threshold,
            untrustworthy: labels.iter().filter(|&&l| l == Verdict::Untrustworthy).count(),
            evaluated: eval.len(),
            rows: vec![
                row(METHOD_TRUST, trust_t, trust_cal, &ev_t, &ev_l),
                row(METHOD_NAIVE, naive_t, naive_cal, &ev_c, &ev_l),
            ],
            warnings,
        });
        if primary.is_none() {
            primary = Some((labels, trust_t, naive_t));
        }
    }

    let dump = match primary {
        None => Vec::new(),
        Some((labels, trust_t, naive_t)) => assessed
            .iter()
            .enumerate()
            .map(|(i, a)| EvalRecord {
                function_id: a.function_id.clone(),
                split: split[i],
                iou: a.iou,
                gt_label: labels[i],
                scores: [(METHOD_TRUST.to_string(), a.trust), (METHOD_NAIVE.to_string(), a.confidence)].into(),
                verdicts: [
                    (METHOD_TRUST.to_string(), Orientation::LowerIsPositive.classify(a.trust, trust_t)),
                    (METHOD_NAIVE.to_string(), Orientation::LowerIsPositive.classify(a.confidence, naive_t)),
                ]
                .into(),
                suspicious: a.suspicious.iter().copied().collect(),
            })
            .collect(),
    };
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION.into(),
        config: cfg.clone(),
        assessed: assessed.len(),
        skipped,
        tables,
        records: dump,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "  n/a".into(), |x| format!("{x:.3}"))
}

/// Text tables in the column order Acc, AUC, Pre, Sen, F1, Spe, Gm.
pub fn render_report(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "assessed {} function(s), skipped {}, top_k {}",
        report.assessed,
        report.skipped.len(),
        report.config.top_k
    );
    for s in &report.skipped {
        let _ = writeln!(out, "skipped record {} `{}`: {}", s.record, s.function_id, s.reason);
    }
    for t in &report.tables {
        let _ = writeln!(
            out,
            "\nIoU threshold {}: {} untrustworthy of {} assessed, {} evaluated",
            t.iou_threshold, t.untrustworthy, report.assessed, t.evaluated
        );
        let _ = writeln!(
            out,
            "{:<11} {:>9}  {:>5} {:>5} {:>5} {:>5} {:>5} {:>5} {:>5}",
            "method", "threshold", "Acc", "AUC", "Pre", "Sen", "F1", "Spe", "Gm"
        );
        for r in &t.rows {
            let m = &r.metrics;
            let _ = writeln!(
                out,
                "{:<11} {:>9.4}  {:>5} {:>5} {:>5} {:>5} {:>5} {:>5} {:>5}",
                r.method,
                r.threshold,
                cell(m.accuracy),
                cell(m.auc),
                cell(m.precision),
                cell(m.sensitivity),
                cell(m.f1),
                cell(m.specificity),
                cell(m.gmean)
            );
        }
        for w in &t.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
    }
    out
}
