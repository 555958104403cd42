//! Ground truth, confusion-matrix metrics, AUC and G-mean calibration.
//!
//! The positive class is `Untrustworthy` throughout.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assess::Verdict;
use crate::pdg::{Explanation, LineId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("ground truth has no vulnerable lines")]
    EmptyTruth,
    #[error("calibration needs both labels")]
    SingleClass,
    #[error("{0} scores but {1} labels")]
    LengthMismatch(usize, usize),
}

pub fn iou(suspicious: &BTreeSet<LineId>, truth: &BTreeSet<LineId>) -> Result<f64, MetricsError> {
    if truth.is_empty() {
        return Err(MetricsError::EmptyTruth);
    }
    let inter = suspicious.intersection(truth).count();
    let union = suspicious.union(truth).count();
    Ok(inter as f64 / union as f64)
}

/// The `k` highest-scored lines of `expl`, ties to the smaller line.
pub fn select_suspicious(expl: &Explanation, k: usize) -> BTreeSet<LineId> {
    let mut entries: Vec<_> = expl.entries.iter().collect();
    entries.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.line.cmp(&b.line)));
    entries.into_iter().take(k).map(|e| e.line).collect()
}

/// Untrustworthy when the overlap is at or below the threshold.
pub fn label_ground_truth(iou_value: f64, threshold: f64) -> Verdict {
    if iou_value <= threshold {
        Verdict::Untrustworthy
    } else {
        Verdict::Trustworthy
    }
}

/// Untrustworthy when confidence is strictly below the threshold.
pub fn naive_baseline(confidences: &[f64], threshold: f64) -> Vec<Verdict> {
    confidences.iter().map(|&c| if c < threshold { Verdict::Untrustworthy } else { Verdict::Trustworthy }).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn from_pairs(truth: &[Verdict], predicted: &[Verdict]) -> Self {
        let mut c = Confusion::default();
        for (t, p) in truth.iter().zip(predicted) {
            match (t, p) {
                (Verdict::Untrustworthy, Verdict::Untrustworthy) => c.tp += 1,
                (Verdict::Trustworthy, Verdict::Untrustworthy) => c.fp += 1,
                (Verdict::Trustworthy, Verdict::Trustworthy) => c.tn += 1,
                (Verdict::Untrustworthy, Verdict::Trustworthy) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// The seven reported metrics. Ratios with a zero denominator are `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: Option<f64>,
    pub auc: Option<f64>,
    pub precision: Option<f64>,
    pub sensitivity: Option<f64>,
    pub f1: Option<f64>,
    pub specificity: Option<f64>,
    pub gmean: Option<f64>,
}

impl Metrics {
    pub fn from_confusion(c: &Confusion, auc: Option<f64>) -> Self {
        let precision = ratio(c.tp, c.tp + c.fp);
        let sensitivity = ratio(c.tp, c.tp + c.fn_);
        let specificity = ratio(c.tn, c.tn + c.fp);
        let f1 = match (precision, sensitivity) {
            (Some(p), Some(s)) if p + s > 0.0 => Some(2.0 * p * s / (p + s)),
            (Some(_), Some(_)) => Some(0.0),
            _ => None,
        };
        let gmean = match (sensitivity, specificity) {
            (Some(s), Some(t)) => Some((s * t).sqrt()),
            _ => None,
        };
        Metrics { accuracy: ratio(c.tp + c.tn, c.total()), auc, precision, sensitivity, f1, specificity, gmean }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    LowerIsPositive,
    HigherIsPositive,
}

impl Orientation {
    fn positive_rank_key(self, score: f64) -> f64 {
        match self {
            Orientation::LowerIsPositive => -score,
            Orientation::HigherIsPositive => score,
        }
    }

    /// Verdict for `score` against a threshold under this orientation.
    pub fn classify(self, score: f64, threshold: f64) -> Verdict {
        let positive = match self {
            Orientation::LowerIsPositive => score < threshold,
            Orientation::HigherIsPositive => score > threshold,
        };
        if positive {
            Verdict::Untrustworthy
        } else {
            Verdict::Trustworthy
        }
    }
}

/// Rank-based AUC: the probability that a random positive ranks above a
/// random negative, ties counting half. `None` without both labels.
pub fn auc(scores: &[f64], labels: &[Verdict], orientation: Orientation) -> Option<f64> {
    let mut keyed: Vec<(f64, bool)> = scores
        .iter()
        .zip(labels)
        .map(|(&s, &l)| (orientation.positive_rank_key(s), l == Verdict::Untrustworthy))
        .collect();
    let pos = keyed.iter().filter(|k| k.1).count();
    let neg = keyed.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < keyed.len() {
        let mut j = i;
        while j < keyed.len() && keyed[j].0 == keyed[i].0 {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        rank_sum += avg_rank * keyed[i..j].iter().filter(|k| k.1).count() as f64;
        i = j;
    }
    let (p, n) = (pos as f64, neg as f64);
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub threshold: f64,
    pub gmean: f64,
    /// Set when no threshold separates the labels at all.
    pub degenerate: bool,
}

fn gmean_at(scores: &[f64], labels: &[Verdict], orientation: Orientation, threshold: f64) -> f64 {
    let predicted: Vec<Verdict> = scores.iter().map(|&s| orientation.classify(s, threshold)).collect();
    Metrics::from_confusion(&Confusion::from_pairs(labels, &predicted), None).gmean.unwrap_or(0.0)
}

/// Threshold maximizing G-mean among midpoints of consecutive distinct
/// scores; the smallest wins ties.
pub fn calibrate_threshold(
    scores: &[f64],
    labels: &[Verdict],
    orientation: Orientation,
) -> Result<Calibration, MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch(scores.len(), labels.len()));
    }
    let positives = labels.iter().filter(|&&l| l == Verdict::Untrustworthy).count();
    if positives == 0 || positives == labels.len() {
        return Err(MetricsError::SingleClass);
    }
    let mut distinct: Vec<f64> = scores.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() == 1 {
        return Ok(Calibration { threshold: distinct[0], gmean: 0.0, degenerate: true });
    }
    let mut best = Calibration { threshold: f64::NAN, gmean: -1.0, degenerate: false };
    for w in distinct.windows(2) {
        let threshold = (w[0] + w[1]) / 2.0;
        let g = gmean_at(scores, labels, orientation, threshold);
        if g > best.gmean {
            best = Calibration { threshold, gmean: g, degenerate: false };
        }
    }
    best.degenerate = best.gmean == 0.0;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Verdict::{Trustworthy as T, Untrustworthy as U};

    fn ids(v: &[u32]) -> BTreeSet<LineId> {
        v.iter().map(|&n| LineId::new(n).unwrap()).collect()
    }

    #[test]
    fn iou_cases() {
        assert_eq!(iou(&ids(&[7]), &ids(&[7])).unwrap(), 1.0);
        assert_eq!(iou(&ids(&[1, 4, 5, 8]), &ids(&[7])).unwrap(), 0.0);
        assert_eq!(iou(&ids(&[3, 7]), &ids(&[7])).unwrap(), 0.5);
        assert_eq!(iou(&ids(&[]), &ids(&[7])).unwrap(), 0.0);
        assert_eq!(iou(&ids(&[7]), &ids(&[])), Err(MetricsError::EmptyTruth));
    }

    #[test]
    fn top_k_selection() {
        let expl = Explanation::new(
            "f",
            1.0,
            vec![(1, 0.13), (3, 0.06), (4, 0.18), (5, 0.27), (7, 0.08), (8, 0.19), (9, 0.04)],
        )
        .unwrap();
        assert_eq!(select_suspicious(&expl, 3), ids(&[4, 5, 8]));
        assert_eq!(select_suspicious(&expl, 50).len(), 7);
        let tied = Explanation::new("f", 1.0, vec![(9, 0.5), (2, 0.5)]).unwrap();
        assert_eq!(select_suspicious(&tied, 1), ids(&[2]));
    }

    #[test]
    fn boundaries() {
        assert_eq!(label_ground_truth(1.0, 0.5), T);
        assert_eq!(label_ground_truth(0.5, 0.5), U);
        assert_eq!(label_ground_truth(0.0, 0.5), U);
        assert_eq!(naive_baseline(&[0.3, 0.5, 0.9], 0.5), vec![U, T, T]);
    }

    #[test]
    fn hand_computed_confusion() {
        let c = Confusion { tp: 2, fp: 1, tn: 3, fn_: 0 };
        let m = Metrics::from_confusion(&c, None);
        assert!((m.accuracy.unwrap() - 5.0 / 6.0).abs() < 1e-12);
        assert!((m.precision.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.sensitivity, Some(1.0));
        assert_eq!(m.specificity, Some(0.75));
        assert!((m.f1.unwrap() - 0.8).abs() < 1e-12);
        assert!((m.gmean.unwrap() - 0.75f64.sqrt()).abs() < 1e-12);
        assert_eq!(Metrics::from_confusion(&Confusion { tp: 0, fp: 0, tn: 3, fn_: 0 }, None).precision, None);
    }

    #[test]
    fn auc_extremes_and_orientation() {
        let labels = [U, U, T, T];
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &labels, Orientation::LowerIsPositive), Some(1.0));
        assert_eq!(auc(&[0.9, 0.8, 0.1, 0.2], &labels, Orientation::LowerIsPositive), Some(0.0));
        assert_eq!(auc(&[0.5; 4], &labels, Orientation::LowerIsPositive), Some(0.5));
        let s = [0.3, 0.7, 0.2, 0.9];
        let neg: Vec<f64> = s.iter().map(|x| -x).collect();
        assert_eq!(auc(&s, &labels, Orientation::LowerIsPositive), auc(&neg, &labels, Orientation::HigherIsPositive));
        assert_eq!(auc(&[0.1], &[U], Orientation::LowerIsPositive), None);
    }

    #[test]
    fn calibration() {
        let c = calibrate_threshold(&[0.1, 0.2, 0.8, 0.9], &[U, U, T, T], Orientation::LowerIsPositive).unwrap();
        assert!((c.threshold - 0.5).abs() < 1e-12);
        assert_eq!(c.gmean, 1.0);
        let c = calibrate_threshold(&[0.4; 4], &[U, T, U, T], Orientation::LowerIsPositive).unwrap();
        assert!(c.degenerate);
        assert_eq!(c.gmean, 0.0);
        assert_eq!(
            calibrate_threshold(&[0.1, 0.2], &[U, U], Orientation::LowerIsPositive),
            Err(MetricsError::SingleClass)
        );
    }

    #[test]
    fn calibration_beats_every_midpoint_on_a_mixed_fixture() {
        let scores = [0.05, 0.3, 0.35, 0.6, 0.62, 0.9];
        let labels = [U, T, U, U, T, T];
        let c = calibrate_threshold(&scores, &labels, Orientation::LowerIsPositive).unwrap();
        let mut sorted = scores.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut best = (f64::NAN, -1.0);
        for w in sorted.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let g = gmean_at(&scores, &labels, Orientation::LowerIsPositive, t);
            assert!(c.gmean >= g);
            if g > best.1 {
                best = (t, g);
            }
        }
        assert_eq!(c.threshold, best.0);
    }
}
