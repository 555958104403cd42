//! Line classifiers: native logistic models over one feature view, fixed
//! stubs, and external adapters.
//!
//! Every classifier scores a line with the probability that it is benign,
//! meaning it resembles non-vulnerable code. The vote is 1 when the score is
//! at or above the classifier's threshold.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::adapter::{AdapterClient, AdapterError};
use super::dataset::{Label, LineSample};
use super::features::{FeatureVector, FeatureView, Vocabulary};
use crate::frontend::normalize_line;
use crate::same_major;

/// Version written into every persisted model.
pub const MODEL_SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("training data has only {0:?} samples; both labels are required")]
    Degenerate(Label),
    #[error("training data is empty")]
    Empty,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("line is empty after normalization")]
    EmptyLine,
    #[error(transparent)]
    Adapter(#[from] AdapterError),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unsupported model schema version `{0}`")]
    SchemaVersion(String),
    #[error("model document: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub threshold: f64,
    pub alpha_rename: bool,
}

impl TrainConfig {
    pub fn new(seed: u64) -> Self {
        Self { seed, epochs: 30, learning_rate: 0.5, l2: 1e-4, threshold: 0.5, alpha_rename: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub view: FeatureView,
    pub n_train: usize,
    pub n_holdout: usize,
    pub train_accuracy: f64,
    /// `None` when the holdout split is empty.
    pub holdout_accuracy: Option<f64>,
}

/// L2-regularized logistic regression over one feature view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub view: FeatureView,
    pub alpha_rename: bool,
    pub vocabulary: Vocabulary,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub threshold: f64,
    pub seed: u64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LinearModel {
    fn margin(&self, x: &FeatureVector) -> f64 {
        self.bias + x.indices.iter().map(|(&i, v)| self.weights[i as usize] * v).sum::<f64>()
    }

    pub fn score(&self, text: &str) -> f64 {
        let text = normalize_line(text, self.alpha_rename);
        sigmoid(self.margin(&self.vocabulary.vectorize(self.view, &text)))
    }
}

/// Fixed scores keyed by normalized line text, for tests and demos.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StubClassifier {
    pub name: String,
    pub default_score: f64,
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
    pub threshold: f64,
}

impl StubClassifier {
    pub fn constant(name: impl Into<String>, score: f64) -> Self {
        Self { name: name.into(), default_score: score, overrides: BTreeMap::new(), threshold: 0.5 }
    }

    /// Gives `line` the score `score`. The key is normalized.
    pub fn with(mut self, line: &str, score: f64) -> Self {
        self.overrides.insert(normalize_line(line, false), score);
        self
    }

    pub fn score(&self, text: &str) -> f64 {
        self.overrides.get(&normalize_line(text, false)).copied().unwrap_or(self.default_score)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterClassifier {
    #[serde(flatten)]
    pub client: AdapterClient,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub vote: u8,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LineClassifier {
    Linear(LinearModel),
    Stub(StubClassifier),
    Adapter(AdapterClassifier),
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    schema_version: String,
    #[serde(flatten)]
    classifier: LineClassifier,
}

impl LineClassifier {
    pub fn name(&self) -> String {
        match self {
            LineClassifier::Linear(m) => m.view.name().to_string(),
            LineClassifier::Stub(s) => s.name.clone(),
            LineClassifier::Adapter(a) => a.client.endpoint.clone(),
        }
    }

    pub fn threshold(&self) -> f64 {
        match self {
            LineClassifier::Linear(m) => m.threshold,
            LineClassifier::Stub(s) => s.threshold,
            LineClassifier::Adapter(a) => a.threshold,
        }
    }

    pub fn classify(&self, text: &str) -> Result<Classification, ClassifyError> {
        if text.trim().is_empty() || normalize_line(text, false).is_empty() {
            return Err(ClassifyError::EmptyLine);
        }
        let score = match self {
            LineClassifier::Linear(m) => m.score(text),
            LineClassifier::Stub(s) => s.score(text),
            LineClassifier::Adapter(a) => a.client.score(text)?,
        };
        Ok(Classification { vote: u8::from(score >= self.threshold()), score })
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDocument { schema_version: MODEL_SCHEMA_VERSION.into(), classifier: self.clone() };
        serde_json::to_string_pretty(&doc).expect("models always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if !same_major(&doc.schema_version, MODEL_SCHEMA_VERSION) {
            return Err(ModelError::SchemaVersion(doc.schema_version));
        }
        Ok(doc.classifier)
    }
}

pub fn classify_line(model: &LineClassifier, text: &str) -> Result<Classification, ClassifyError> {
    model.classify(text)
}

fn target(label: Label) -> f64 {
    match label {
        Label::NonVulnerable => 1.0,
        Label::Vulnerable => 0.0,
    }
}

/// Trains a logistic model on `samples` with seeded stochastic gradient
/// descent, holding out a stratified tenth of each label for evaluation.
pub fn train_classifier(
    samples: &[LineSample],
    view: FeatureView,
    cfg: &TrainConfig,
) -> Result<(LinearModel, TrainReport), TrainError> {
    let first = samples.first().ok_or(TrainError::Empty)?.label;
    if samples.iter().all(|s| s.label == first) {
        return Err(TrainError::Degenerate(first));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut rng);
    let mut holdout_quota: BTreeMap<Label, usize> = BTreeMap::new();
    for s in samples {
        *holdout_quota.entry(s.label).or_insert(0) += 1;
    }
    holdout_quota.values_mut().for_each(|c| *c /= 10);
    let (mut train, mut holdout) = (Vec::new(), Vec::new());
    for i in order {
        let quota = holdout_quota.get_mut(&samples[i].label).expect("label counted");
        if *quota > 0 {
            *quota -= 1;
            holdout.push(i);
        } else {
            train.push(i);
        }
    }

    let texts: Vec<String> = samples.iter().map(|s| normalize_line(&s.text, cfg.alpha_rename)).collect();
    let vocabulary = Vocabulary::build(view, train.iter().map(|&i| texts[i].as_str()));
    let vectors: Vec<FeatureVector> = texts.iter().map(|t| vocabulary.vectorize(view, t)).collect();

    // Weights are stored as `scale * v` so the L2 shrinkage is O(1) per step.
    let mut v = vec![0.0; vocabulary.len()];
    let mut scale = 1.0;
    let mut bias = 0.0;
    let mut visit = train.clone();
    for epoch in 0..cfg.epochs {
        visit.shuffle(&mut rng);
        let lr = cfg.learning_rate / (1.0 + epoch as f64 * 0.1);
        for &i in &visit {
            let x = &vectors[i];
            let z = bias + scale * x.indices.iter().map(|(&j, xv)| v[j as usize] * xv).sum::<f64>();
            let g = sigmoid(z) - target(samples[i].label);
            scale *= 1.0 - lr * cfg.l2;
            for (&j, xv) in &x.indices {
                v[j as usize] -= lr * g * xv / scale;
            }
            bias -= lr * g;
            if scale < 1e-6 {
                v.iter_mut().for_each(|w| *w *= scale);
                scale = 1.0;
            }
        }
    }
    let weights = v.into_iter().map(|w| w * scale).collect();
    let model = LinearModel {
        view,
        alpha_rename: cfg.alpha_rename,
        vocabulary,
        weights,
        bias,
        threshold: cfg.threshold,
        seed: cfg.seed,
    };
    let accuracy = |idx: &[usize]| {
        let correct = idx
            .iter()
            .filter(|&&i| {
                let benign = sigmoid(model.margin(&vectors[i])) >= model.threshold;
                benign == (samples[i].label == Label::NonVulnerable)
            })
            .count();
        correct as f64 / idx.len() as f64
    };
    let report = TrainReport {
        view,
        n_train: train.len(),
        n_holdout: holdout.len(),
        train_accuracy: accuracy(&train),
        holdout_accuracy: (!holdout.is_empty()).then(|| accuracy(&holdout)),
    };
    Ok((model, report))
}
