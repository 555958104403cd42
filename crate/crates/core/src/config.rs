//! Run configuration shared by every command, stored as TOML.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assess::{AssessOptions, DataRule, ReachOptions, TargetScope};
use crate::eval::EvalConfig;
use crate::lines::{DatasetParams, FeatureView};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{field} = {value} is outside {range}")]
    OutOfRange { field: &'static str, value: String, range: &'static str },
    #[error("config file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub iou_threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trust_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub naive_threshold: Option<f64>,
    pub top_k: usize,
    pub normalize_weights: bool,
    pub bleu_threshold: f64,
    pub bleu_order: usize,
    pub data_rule: DataRule,
    pub target_scope: TargetScope,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub neg_ratio: f64,
    pub alpha_rename: bool,
    pub calibration_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Feature views served by an external classifier instead of a native
    /// model, mapped to `tcp://host:port` endpoints.
    pub adapters: BTreeMap<FeatureView, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            trust_threshold: None,
            naive_threshold: None,
            top_k: 10,
            normalize_weights: true,
            bleu_threshold: 0.5,
            bleu_order: 4,
            data_rule: DataRule::Direct,
            target_scope: TargetScope::Suspicious,
            seed: None,
            neg_ratio: 1.0,
            alpha_rename: false,
            calibration_fraction: 0.2,
            workers: None,
            adapters: BTreeMap::new(),
        }
    }
}

fn check(ok: bool, field: &'static str, value: impl ToString, range: &'static str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange { field, value: value.to_string(), range })
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let unit_open = |v: f64| v > 0.0 && v <= 1.0;
        check(unit_open(self.iou_threshold), "iou_threshold", self.iou_threshold, "(0, 1]")?;
        if let Some(t) = self.trust_threshold {
            check(t.is_finite() && t >= 0.0, "trust_threshold", t, "[0, inf)")?;
        }
        if let Some(t) = self.naive_threshold {
            check((0.0..=1.0).contains(&t), "naive_threshold", t, "[0, 1]")?;
        }
        check(self.top_k >= 1, "top_k", self.top_k, "[1, inf)")?;
        check(unit_open(self.bleu_threshold), "bleu_threshold", self.bleu_threshold, "(0, 1]")?;
        check(self.bleu_order >= 1, "bleu_order", self.bleu_order, "[1, inf)")?;
        check(self.neg_ratio.is_finite() && self.neg_ratio > 0.0, "neg_ratio", self.neg_ratio, "(0, inf)")?;
        check(
            self.calibration_fraction > 0.0 && self.calibration_fraction < 1.0,
            "calibration_fraction",
            self.calibration_fraction,
            "(0, 1)",
        )?;
        if let Some(w) = self.workers {
            check(w >= 1, "workers", w, "[1, inf)")?;
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    pub fn assess_options(&self) -> AssessOptions {
        AssessOptions {
            normalize_weights: self.normalize_weights,
            reach: ReachOptions { data_rule: self.data_rule, target_scope: self.target_scope },
        }
    }

    pub fn dataset_params(&self) -> DatasetParams {
        DatasetParams {
            neg_ratio: self.neg_ratio,
            bleu_threshold: self.bleu_threshold,
            bleu_order: self.bleu_order,
            seed: self.seed.unwrap_or(0),
            alpha_rename: self.alpha_rename,
        }
    }

    /// Evaluation settings; `sweep` replaces the single IoU threshold when
    /// non-empty.
    pub fn eval_config(&self, sweep: &[f64]) -> EvalConfig {
        EvalConfig {
            iou_thresholds: if sweep.is_empty() { vec![self.iou_threshold] } else { sweep.to_vec() },
            top_k: self.top_k,
            trust_threshold: self.trust_threshold,
            naive_threshold: self.naive_threshold,
            calibration_fraction: self.calibration_fraction,
            seed: self.seed.unwrap_or(0),
            assess: self.assess_options(),
            workers: self.workers,
        }
    }
}
