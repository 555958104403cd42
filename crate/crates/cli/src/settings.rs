//! Layered configuration: built-in defaults, then the config file, then the
//! environment, then command-line flags.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use vulntrust_core::assess::{DataRule, TargetScope};
use vulntrust_core::config::RunConfig;
use vulntrust_core::lines::FeatureView;

/// `view=tcp://host:port` pairs, comma separated.
pub const ADAPTERS_ENV: &str = "VULNTRUST_ADAPTERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DataRuleArg {
    Direct,
    TransitiveFlow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TargetScopeArg {
    Suspicious,
    AnyLine,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML file with run settings
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Untrustworthy ground truth at or below this IoU
    #[arg(long, global = true)]
    pub iou_threshold: Option<f64>,
    /// Untrustworthy verdict below this trust score
    #[arg(long, global = true)]
    pub trust_threshold: Option<f64>,
    /// Untrustworthy naive verdict below this confidence
    #[arg(long, global = true)]
    pub naive_threshold: Option<f64>,
    /// Number of best-scored lines kept from each explanation
    #[arg(long, global = true)]
    pub top_k: Option<usize>,
    /// Rescale retained line weights to sum to 1
    #[arg(long, global = true, value_name = "BOOL")]
    pub normalize_weights: Option<bool>,
    /// Candidate negatives at or above this BLEU are dropped
    #[arg(long, global = true)]
    pub bleu_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub bleu_order: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub data_rule: Option<DataRuleArg>,
    #[arg(long, global = true, value_enum)]
    pub target_scope: Option<TargetScopeArg>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Sampled negatives per vulnerable line
    #[arg(long, global = true)]
    pub neg_ratio: Option<f64>,
    /// Rename identifiers to VAR1..VARn before classification
    #[arg(long, global = true, value_name = "BOOL")]
    pub alpha_rename: Option<bool>,
    #[arg(long, global = true)]
    pub calibration_fraction: Option<f64>,
    /// Worker threads for batch commands
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Serve a feature view from an external classifier, as VIEW=tcp://HOST:PORT
    #[arg(long = "adapter", global = true, value_name = "VIEW=ENDPOINT")]
    pub adapters: Vec<String>,
}

fn parse_adapters(list: impl IntoIterator<Item = String>) -> Result<BTreeMap<FeatureView, String>> {
    let mut out = BTreeMap::new();
    for item in list {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let (view, endpoint) =
            item.split_once('=').with_context(|| format!("adapter `{item}` is not VIEW=ENDPOINT"))?;
        let view: FeatureView = view.trim().parse().map_err(anyhow::Error::msg)?;
        out.insert(view, endpoint.trim().to_string());
    }
    Ok(out)
}

impl ConfigArgs {
    /// Resolves the effective configuration. `env` stands in for the process
    /// environment so precedence can be tested.
    pub fn resolve(&self, env: impl Fn(&str) -> Option<String>) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text =
                    std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
                RunConfig::from_toml(&text).with_context(|| format!("in config {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(list) = env(ADAPTERS_ENV) {
            cfg.adapters = parse_adapters(list.split(',').map(String::from)).context(ADAPTERS_ENV)?;
        }
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            )*};
        }
        set!(
            iou_threshold,
            top_k,
            normalize_weights,
            bleu_threshold,
            bleu_order,
            neg_ratio,
            alpha_rename,
            calibration_fraction
        );
        macro_rules! set_opt {
            ($($field:ident),*) => {$(
                if self.$field.is_some() {
                    cfg.$field = self.$field;
                }
            )*};
        }
        set_opt!(trust_threshold, naive_threshold, seed, workers);
        if let Some(rule) = self.data_rule {
            cfg.data_rule = match rule {
                DataRuleArg::Direct => DataRule::Direct,
                DataRuleArg::TransitiveFlow => DataRule::TransitiveFlow,
            };
        }
        if let Some(scope) = self.target_scope {
            cfg.target_scope = match scope {
                TargetScopeArg::Suspicious => TargetScope::Suspicious,
                TargetScopeArg::AnyLine => TargetScope::AnyLine,
            };
        }
        if !self.adapters.is_empty() {
            cfg.adapters = parse_adapters(self.adapters.iter().cloned())?;
        }
        if let Err(e) = cfg.validate() {
            bail!("invalid configuration: {e}");
        }
        Ok(cfg)
    }
}
