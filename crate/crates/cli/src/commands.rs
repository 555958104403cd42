//! Subcommand implementations. Each returns the process exit code.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use vulntrust_core::assess::{assess_prediction, render_assessment, Assessment, Verdict};
use vulntrust_core::config::RunConfig;
use vulntrust_core::eval::{render_report, run_evaluation, truncate_explanation};
use vulntrust_core::frontend::{build_pdg, import_raw_graph, merge_line_nodes};
use vulntrust_core::lines::{
    build_dataset, read_corpus, train_classifier, DatasetStore, Ensemble, FeatureView, IngestSummary, LineClassifier,
    TrainConfig, TrainError, DATASET_SCHEMA_VERSION,
};
use vulntrust_core::{Explanation, Pdg};

use crate::models::{load_members, Manifest, ManifestEntry, MANIFEST_FILE, MANIFEST_SCHEMA_VERSION};
use crate::{EXIT_OK, EXIT_UNTRUSTWORTHY};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes to standard output; a closed reader is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e).context("writing to standard output"),
        _ => Ok(()),
    }
}

fn same_major(found: &str, supported: &str) -> bool {
    found.split('.').next() == supported.split('.').next()
}

fn add_summary(total: &mut IngestSummary, part: IngestSummary, corpus: &str) {
    total.functions += part.functions;
    total.vulnerable += part.vulnerable;
    total.candidate_negatives += part.candidate_negatives;
    total.bleu_filtered += part.bleu_filtered;
    total.negatives += part.negatives;
    total.warnings.extend(part.warnings.into_iter().map(|w| format!("{corpus}: {w}")));
}

pub fn ingest(cfg: &RunConfig, paths: &[std::path::PathBuf], out: &Path) -> Result<u8> {
    let params = cfg.dataset_params();
    let mut summary = IngestSummary::default();
    let mut samples = Vec::new();
    for path in paths {
        let corpus = path.file_stem().map_or_else(|| "corpus".into(), |s| s.to_string_lossy().into_owned());
        let records = read_corpus(&read(path)?).with_context(|| format!("{}", path.display()))?;
        let store = build_dataset(&records, &corpus, &params).with_context(|| format!("{}", path.display()))?;
        add_summary(&mut summary, store.summary, &corpus);
        samples.extend(store.samples);
    }
    let store = DatasetStore { schema_version: DATASET_SCHEMA_VERSION.into(), params, summary, samples };
    let json = serde_json::to_string_pretty(&store).expect("datasets always serialize");
    write(out, &json)?;
    let s = &store.summary;
    emit(&format!(
        "functions: {}\nvulnerable lines: {}\ncandidate negatives: {}\nbleu filtered: {}\nnegatives: {}\n",
        s.functions, s.vulnerable, s.candidate_negatives, s.bleu_filtered, s.negatives
    ))?;
    for w in &s.warnings {
        eprintln!("warning: {w}");
    }
    Ok(EXIT_OK)
}

pub fn train(cfg: &RunConfig, dataset: &Path, out: &Path) -> Result<u8> {
    let Some(seed) = cfg.seed else {
        bail!("train needs --seed so the models can be reproduced");
    };
    let store: DatasetStore =
        serde_json::from_str(&read(dataset)?).with_context(|| format!("parsing {}", dataset.display()))?;
    if !same_major(&store.schema_version, DATASET_SCHEMA_VERSION) {
        bail!("{}: unsupported dataset schema version `{}`", dataset.display(), store.schema_version);
    }
    let mut tc = TrainConfig::new(seed);
    tc.alpha_rename = store.params.alpha_rename;
    let trained = std::thread::scope(|scope| {
        let handles: Vec<_> = FeatureView::ALL
            .into_iter()
            .map(|view| {
                let (samples, tc) = (&store.samples, &tc);
                scope.spawn(move || (view, train_classifier(samples, view, tc)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect::<Vec<_>>()
    });
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut entries = Vec::new();
    for (view, result) in trained {
        let (model, report) = result.map_err(|e| match e {
            TrainError::Degenerate(_) => anyhow::anyhow!("degenerate training data: {e}"),
            TrainError::Empty => anyhow::anyhow!("degenerate training data: {e}"),
        })?;
        let file = format!("{}.json", view.name());
        write(&out.join(&file), &LineClassifier::Linear(model).to_json())?;
        emit(&format!(
            "{view}: {} train / {} holdout, train accuracy {:.4}, holdout accuracy {}\n",
            report.n_train,
            report.n_holdout,
            report.train_accuracy,
            report.holdout_accuracy.map_or_else(|| "n/a".into(), |a| format!("{a:.4}"))
        ))?;
        entries.push(ManifestEntry { name: view.name().into(), view: Some(view), file, report: Some(report) });
    }
    let manifest = Manifest { schema_version: MANIFEST_SCHEMA_VERSION.into(), seed: Some(seed), models: entries };
    write(&out.join(MANIFEST_FILE), &manifest.to_json())?;
    Ok(EXIT_OK)
}

fn load_pdg(source: &str, source_path: &Path, import: Option<&Path>, expl: &Explanation) -> Result<Pdg> {
    let mut pdg = match import {
        None => build_pdg(source).map_err(|e| {
            anyhow::anyhow!(
                "cannot parse {}: {e}; supply an exported dependency graph with --import-pdg FILE",
                source_path.display()
            )
        })?,
        Some(path) => {
            let text = read(path)?;
            let value: serde_json::Value =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            if value.get("schema_version").is_some() {
                Pdg::from_json(&text).with_context(|| format!("loading {}", path.display()))?
            } else {
                let imported = import_raw_graph(&text).with_context(|| format!("importing {}", path.display()))?;
                if imported.dropped_edges > 0 {
                    eprintln!(
                        "warning: ignored {} edges that are not control or data dependences",
                        imported.dropped_edges
                    );
                }
                merge_line_nodes(&imported.graph, source).with_context(|| format!("merging {}", path.display()))?
            }
        }
    };
    if pdg.function_id.is_empty() {
        pdg.function_id = expl.function_id.clone();
    }
    Ok(pdg)
}

pub fn assess(
    cfg: &RunConfig,
    source_path: &Path,
    explanation_path: &Path,
    models: Option<&Path>,
    import: Option<&Path>,
    out: Option<&Path>,
) -> Result<u8> {
    let source = read(source_path)?;
    let expl: Explanation = serde_json::from_str(&read(explanation_path)?)
        .with_context(|| format!("parsing {}", explanation_path.display()))?;
    expl.validate().with_context(|| format!("{}", explanation_path.display()))?;
    let ensemble = Ensemble::new(load_members(models, &cfg.adapters)?);
    let pdg = load_pdg(&source, source_path, import, &expl)?;
    let nodes = pdg.node_set();
    let dropped: Vec<_> = expl.lines().filter(|l| !nodes.contains(l)).collect();
    let expl = truncate_explanation(&expl, &pdg, cfg.top_k);
    let (threshold, default_note) = match cfg.trust_threshold {
        Some(t) => (t, None),
        None => (0.5, Some("no trust threshold configured; using 0.5")),
    };
    let mut assessment: Assessment = assess_prediction(&expl, &pdg, &ensemble, threshold, &cfg.assess_options())?;
    if !dropped.is_empty() {
        let listed: Vec<String> = dropped.iter().map(|l| l.to_string()).collect();
        assessment.warnings.insert(0, format!("lines without a graph node were ignored: {}", listed.join(", ")));
        assessment.dropped = dropped;
    }
    if let Some(note) = default_note {
        assessment.warnings.insert(0, note.into());
    }
    for w in &assessment.warnings {
        eprintln!("warning: {w}");
    }
    let json = assessment.to_json();
    match out {
        Some(path) => write(path, &format!("{json}\n"))?,
        None => emit(&format!("{json}\n"))?,
    }
    Ok(match assessment.verdict {
        Verdict::Trustworthy => EXIT_OK,
        Verdict::Untrustworthy => EXIT_UNTRUSTWORTHY,
    })
}

pub fn evaluate(
    cfg: &RunConfig,
    corpus: &Path,
    models: Option<&Path>,
    sweep: &[f64],
    out: Option<&Path>,
) -> Result<u8> {
    if let Some(t) = sweep.iter().find(|&&t| !(t > 0.0 && t <= 1.0)) {
        bail!("sweep threshold {t} outside (0, 1]");
    }
    let records = read_corpus(&read(corpus)?).with_context(|| format!("{}", corpus.display()))?;
    let ensemble = Ensemble::new(load_members(models, &cfg.adapters)?);
    let report = run_evaluation(&records, &ensemble, &cfg.eval_config(sweep))?;
    let text = render_report(&report);
    if let Some(dir) = out {
        let json = serde_json::to_string_pretty(&report).expect("reports always serialize");
        write(&dir.join("report.json"), &format!("{json}\n"))?;
        write(&dir.join("report.txt"), &text)?;
    }
    emit(&text)?;
    if !report.skipped.is_empty() {
        eprintln!("warning: skipped {} function(s)", report.skipped.len());
        for s in &report.skipped {
            eprintln!("warning: record {} (`{}`): {}", s.record, s.function_id, s.reason);
        }
    }
    Ok(EXIT_OK)
}

pub fn report(paths: &[std::path::PathBuf]) -> Result<u8> {
    let mut sections = Vec::with_capacity(paths.len());
    for path in paths {
        let a = Assessment::from_json(&read(path)?).with_context(|| format!("{}", path.display()))?;
        sections.push(render_assessment(&a));
    }
    emit(&sections.join("\n"))?;
    Ok(EXIT_OK)
}
