//! Model directories: one file per classifier plus a manifest.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use vulntrust_core::lines::{AdapterClassifier, AdapterClient, FeatureView, LineClassifier, TrainReport};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view: Option<FeatureView>,
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<TrainReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub models: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifests always serialize")
    }
}

fn major(v: &str) -> &str {
    v.split('.').next().unwrap_or(v)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let m: Manifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if major(&m.schema_version) != major(MANIFEST_SCHEMA_VERSION) {
        bail!("{}: unsupported manifest schema version `{}`", path.display(), m.schema_version);
    }
    Ok(m)
}

/// Loads the ensemble members, letting `adapters` replace or add the member
/// for a feature view.
pub fn load_members(dir: Option<&Path>, adapters: &BTreeMap<FeatureView, String>) -> Result<Vec<LineClassifier>> {
    let mut members: Vec<(Option<FeatureView>, LineClassifier)> = Vec::new();
    if let Some(dir) = dir {
        for entry in read_manifest(dir)?.models {
            let path = dir.join(&entry.file);
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading model {}", path.display()))?;
            let model =
                LineClassifier::from_json(&text).with_context(|| format!("loading model {}", path.display()))?;
            let view = entry.view.or_else(|| match &model {
                LineClassifier::Linear(m) => Some(m.view),
                _ => entry.name.parse().ok(),
            });
            members.push((view, model));
        }
    }
    for (&view, endpoint) in adapters {
        let client = AdapterClient::new(endpoint.clone()).with_context(|| format!("adapter for {view}"))?;
        let adapter = LineClassifier::Adapter(AdapterClassifier { client, threshold: 0.5 });
        match members.iter_mut().find(|(v, _)| *v == Some(view)) {
            Some(slot) => slot.1 = adapter,
            None => members.push((Some(view), adapter)),
        }
    }
    if members.is_empty() {
        bail!("no classifiers: pass --models DIR or configure adapters");
    }
    Ok(members.into_iter().map(|(_, m)| m).collect())
}
