//! Acceptance suite. Prints one PASS or FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use common::oracle::synth::{record, stub_ensemble, Planted};
use common::oracle::{l, oracle_distances, random_case, textbook_bleu};
use common::{fixture, path_str, run, vrrp_models};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vulntrust_core::assess::{
    is_vulnerable_dependency, reachability_distance, Assessment, BenignSet, Distance, ReachOptions, Verdict,
};
use vulntrust_core::eval::{
    auc, calibrate_threshold, run_evaluation, Confusion, EvalConfig, Metrics, Orientation, METHOD_NAIVE, METHOD_TRUST,
};
use vulntrust_core::frontend::build_pdg;
use vulntrust_core::lines::{bleu, ensemble_vote};
use vulntrust_core::{build_weighted_pdg, Explanation, PdgEdge};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn within(elapsed: Duration, limit: Duration) -> Outcome {
    ensure!(elapsed <= limit, "took {elapsed:?}, limit {limit:?}");
    Ok(format!("{elapsed:.2?}"))
}

fn worked_example() -> Outcome {
    let started = Instant::now();
    let source = std::fs::read_to_string(fixture("vrrp_print_data.c")).unwrap();
    let pdg = build_pdg(&source).map_err(|e| e.to_string())?;
    let expl: Explanation =
        serde_json::from_str(&std::fs::read_to_string(fixture("vrrp_explanation.json")).unwrap()).unwrap();
    let g = build_weighted_pdg(&pdg, &expl, false).map_err(|e| e.to_string())?;
    let benign = BenignSet::new("vrrp_print_data", [1, 3, 4, 5, 8, 9].map(l));
    let opts = ReachOptions::default();
    let edge = |src: u32, dst: u32| -> PdgEdge {
        pdg.edges.iter().find(|e| e.src == l(src) && e.dst == l(dst)).cloned().expect("edge exists")
    };
    for (s, d, want) in [(1, 3, true), (3, 7, true), (3, 4, false), (3, 5, false), (7, 8, false), (8, 9, false)] {
        let got = is_vulnerable_dependency(&edge(s, d), &g, &benign, opts).map_err(|e| e.to_string())?;
        ensure!(got == want, "p({s}->{d}) = {got}");
    }
    for s in [4, 5, 8] {
        let r = reachability_distance(l(s), l(7), &g, &benign, opts).map_err(|e| e.to_string())?;
        ensure!(r == Distance::Infinite, "r({s},7) = {r}");
    }
    let dir = tempfile::tempdir().unwrap();
    vrrp_models(dir.path());
    let out = run([
        "assess",
        path_str(&fixture("vrrp_print_data.c")),
        path_str(&fixture("vrrp_explanation.json")),
        "--models",
        path_str(dir.path()),
        "--normalize-weights",
        "false",
    ]);
    ensure!(out.code == 10, "exit {} ({})", out.code, out.stderr);
    let a = Assessment::from_json(&out.stdout).map_err(|e| e.to_string())?;
    ensure!((a.trust_score - 0.245).abs() <= 1e-9, "T = {}", a.trust_score);
    let time = within(started.elapsed(), Duration::from_secs(1))?;
    Ok(format!("T = {:.9}, exit 10, {time}", a.trust_score))
}

fn reachability_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut queries = 0usize;
    for case_no in 0..1000 {
        let case = random_case(&mut rng);
        for &s in &case.benign.members {
            let expected = oracle_distances(&case, s);
            for &t in &case.g.pdg.nodes {
                let want = expected.get(&t).map_or(Distance::Infinite, |&d| Distance::Finite(d));
                let got = reachability_distance(s, t, &case.g, &case.benign, ReachOptions::default())
                    .map_err(|e| format!("case {case_no}: {e}"))?;
                ensure!(got == want, "case {case_no}: r({s},{t}) = {got}, oracle {want}");
                queries += 1;
            }
        }
    }
    let time = within(started.elapsed(), Duration::from_secs(60))?;
    Ok(format!("{queries} queries over 1000 graphs agree, {time}"))
}

fn vote_exhaustiveness() -> Outcome {
    let mut vectors = 0;
    for k in 1..=5u32 {
        for bits in 0..(1u32 << k) {
            let votes: Vec<u8> = (0..k).map(|i| ((bits >> i) & 1) as u8).collect();
            let ones = votes.iter().filter(|&&v| v == 1).count() as f64;
            let want = u8::from(ones / k as f64 >= 0.5);
            let got = ensemble_vote(&votes).map_err(|e| e.to_string())?;
            ensure!(got == want, "{votes:?} -> {got}");
            vectors += 1;
        }
    }
    ensure!(vectors == 62, "{vectors} vectors");
    ensure!(ensemble_vote(&[1, 0]) == Ok(1), "tie [1,0] is not benign");
    Ok("62 vectors, [1,0] -> 1".into())
}

fn bleu_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let alphabet = ["x", "y", "z", "(", ")", ";", "=", "n"];
    let mut worst = 0f64;
    for i in 0..200 {
        let tokens = |rng: &mut ChaCha8Rng| -> Vec<&str> {
            (0..rng.gen_range(1..12)).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()
        };
        let cand = tokens(&mut rng);
        let refs: Vec<Vec<&str>> = (0..rng.gen_range(1..4)).map(|_| tokens(&mut rng)).collect();
        let got = bleu(&cand, &refs, 4).map_err(|e| e.to_string())?;
        let want = textbook_bleu(&cand, &refs, 4);
        ensure!((got - want).abs() <= 1e-9, "case {i}: {got} vs {want}");
        worst = worst.max((got - want).abs());
    }
    let x = ["memcpy", "(", "dst", ",", "src", ",", "n", ")", ";"];
    let same = bleu(&x, &[x.to_vec()], 4).map_err(|e| e.to_string())?;
    ensure!(same == 1.0, "bleu(x, {{x}}) = {same}");
    let disjoint = bleu(&x, &[vec!["return", "0"]], 4).map_err(|e| e.to_string())?;
    ensure!(disjoint <= 1e-6, "disjoint = {disjoint}");
    Ok(format!("200 cases, max error {worst:.1e}; identity 1.0; disjoint {disjoint:.1e}"))
}

fn pairwise_auc(scores: &[f64], labels: &[Verdict]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == Verdict::Untrustworthy && labels[j] == Verdict::Trustworthy {
                pairs += 1.0;
                wins += if si < sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

fn sweep_gmean(scores: &[f64], labels: &[Verdict]) -> f64 {
    let mut candidates: Vec<f64> = scores.to_vec();
    candidates.extend(scores.iter().map(|s| s + 1e-7));
    candidates.push(f64::NEG_INFINITY);
    let mut best = 0f64;
    for t in candidates {
        let (mut tp, mut fp, mut tn, mut fn_) = (0f64, 0f64, 0f64, 0f64);
        for (&s, &y) in scores.iter().zip(labels) {
            match (s < t, y == Verdict::Untrustworthy) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, false) => tn += 1.0,
                (false, true) => fn_ += 1.0,
            }
        }
        best = best.max((tp / (tp + fn_) * tn / (tn + fp)).sqrt());
    }
    best
}

fn metrics_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let close = |a: Option<f64>, b: f64| a.is_some_and(|a| (a - b).abs() <= 1e-12);
    for m in 0..50 {
        let (tp, fp, tn, fn_) = (
            rng.gen_range(1..40usize),
            rng.gen_range(1..40usize),
            rng.gen_range(1..40usize),
            rng.gen_range(1..40usize),
        );
        let c = Confusion { tp, fp, tn, fn_ };
        let (tp_, fp_, tn_, fn__) = (tp as f64, fp as f64, tn as f64, fn_ as f64);
        let mut labels = vec![Verdict::Untrustworthy; tp + fn_];
        labels.extend(vec![Verdict::Trustworthy; tn + fp]);
        let scores: Vec<f64> = labels.iter().map(|_| rng.gen_range(0..20) as f64 / 20.0).collect();
        let area = auc(&scores, &labels, Orientation::LowerIsPositive);
        let got = Metrics::from_confusion(&c, area);
        let sen = tp_ / (tp_ + fn__);
        let spe = tn_ / (tn_ + fp_);
        let pre = tp_ / (tp_ + fp_);
        ensure!(close(got.accuracy, (tp_ + tn_) / (tp_ + tn_ + fp_ + fn__)), "matrix {m}: accuracy");
        ensure!(close(got.precision, pre), "matrix {m}: precision");
        ensure!(close(got.sensitivity, sen), "matrix {m}: sensitivity");
        ensure!(close(got.specificity, spe), "matrix {m}: specificity");
        ensure!(close(got.f1, 2.0 * tp_ / (2.0 * tp_ + fp_ + fn__)), "matrix {m}: f1");
        ensure!(close(got.gmean, (sen * spe).sqrt()), "matrix {m}: gmean");
        ensure!(close(got.auc, pairwise_auc(&scores, &labels)), "matrix {m}: auc");
    }
    let mut fixtures = 0;
    for f in 0..30 {
        let n = rng.gen_range(4..25);
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..10) as f64 / 10.0).collect();
        let labels: Vec<Verdict> =
            (0..n).map(|i| if i % 2 == 0 { Verdict::Untrustworthy } else { Verdict::Trustworthy }).collect();
        let Ok(cal) = calibrate_threshold(&scores, &labels, Orientation::LowerIsPositive) else { continue };
        let best = sweep_gmean(&scores, &labels);
        ensure!((cal.gmean - best).abs() <= 1e-12, "fixture {f}: calibrated {} vs sweep {best}", cal.gmean);
        fixtures += 1;
    }
    Ok(format!("50 matrices match; calibration optimal on {fixtures} fixtures"))
}

fn mixed_corpus(n: usize, seed: u64) -> Vec<vulntrust_core::lines::FunctionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let planted = if i % 2 == 0 { Planted::Focused } else { Planted::Scattered };
            let confidence = rng.gen_range(0.0..1.0);
            record(&format!("f{i}"), planted, confidence, &mut rng)
        })
        .collect()
}

fn ground_truth_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut records = mixed_corpus(100, 6);
    for r in &mut records {
        r.vul_lines = Some((3..=10).filter(|_| rng.gen_bool(0.5)).map(l).collect());
        if r.vul_lines.as_ref().unwrap().is_empty() {
            r.vul_lines = Some(vec![l(6)]);
        }
    }
    let thresholds: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let cfg = EvalConfig {
        iou_thresholds: thresholds,
        top_k: 4,
        trust_threshold: Some(0.1),
        naive_threshold: Some(0.5),
        ..Default::default()
    };
    let report = run_evaluation(&records, &stub_ensemble(), &cfg).map_err(|e| e.to_string())?;
    ensure!(report.assessed == 100, "{} assessed", report.assessed);
    let counts: Vec<usize> = report.tables.iter().map(|t| t.untrustworthy).collect();
    ensure!(counts.windows(2).all(|w| w[0] <= w[1]), "counts {counts:?}");
    Ok(format!("untrustworthy counts {counts:?}"))
}

fn synthetic_discrimination() -> Outcome {
    let started = Instant::now();
    let records = mixed_corpus(200, 7);
    let cfg = EvalConfig { top_k: 4, trust_threshold: Some(0.1), naive_threshold: Some(0.5), ..Default::default() };
    let report = run_evaluation(&records, &stub_ensemble(), &cfg).map_err(|e| e.to_string())?;
    let rows = &report.tables[0].rows;
    let area = |m: &str| rows.iter().find(|r| r.method == m).and_then(|r| r.metrics.auc);
    let (trust, naive) = (area(METHOD_TRUST).ok_or("no trust AUC")?, area(METHOD_NAIVE).ok_or("no naive AUC")?);
    ensure!(trust >= 0.90, "trust AUC {trust:.3}");
    ensure!(trust > naive, "trust AUC {trust:.3} <= naive {naive:.3}");
    let time = within(started.elapsed(), Duration::from_secs(120))?;
    Ok(format!("AUC {trust:.3} vs naive {naive:.3}, {time}"))
}

fn train_models(dir: &Path, seed: &str) -> Result<(), String> {
    let ds = dir.join("dataset.json");
    let out = run(["ingest", path_str(&fixture("ingest_corpus.jsonl")), "--out", path_str(&ds), "--seed", seed]);
    ensure!(out.code == 0, "ingest exit {}: {}", out.code, out.stderr);
    let out = run(["train", path_str(&ds), "--out", path_str(&dir.join("models")), "--seed", seed]);
    ensure!(out.code == 0, "train exit {}: {}", out.code, out.stderr);
    Ok(())
}

fn assess_long(models: &Path, out: &Path) -> Result<(), String> {
    let r = run([
        "assess",
        path_str(&fixture("long_function.c")),
        path_str(&fixture("long_function_explanation.json")),
        "--models",
        path_str(models),
        "--out",
        path_str(out),
    ]);
    ensure!(r.code == 0 || r.code == 10, "assess exit {}: {}", r.code, r.stderr);
    Ok(())
}

fn latency() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    train_models(dir.path(), "3")?;
    let lines = std::fs::read_to_string(fixture("long_function.c")).unwrap().lines().count();
    ensure!(lines == 150, "fixture has {lines} lines");
    let started = Instant::now();
    for i in 0..10 {
        assess_long(&dir.path().join("models"), &dir.path().join(format!("a{i}.json")))?;
    }
    let mean = started.elapsed() / 10;
    ensure!(mean <= Duration::from_millis(1500), "mean {mean:?}");
    Ok(format!("mean {mean:.2?} over 10 runs of a {lines}-line function"))
}

fn snapshot(dir: &Path) -> HashMap<String, Vec<u8>> {
    let mut out = HashMap::new();
    for sub in [dir.to_path_buf(), dir.join("models")] {
        for entry in std::fs::read_dir(sub).unwrap() {
            let path = entry.unwrap().path();
            if path.is_file() {
                out.insert(path.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let runs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for dir in &runs {
        train_models(dir.path(), "42")?;
        assess_long(&dir.path().join("models"), &dir.path().join("assessment.json"))?;
    }
    let (a, b) = (snapshot(runs[0].path()), snapshot(runs[1].path()));
    ensure!(a.len() == 6, "expected 6 artifacts, found {:?}", a.keys().collect::<Vec<_>>());
    let mut names: Vec<&String> = a.keys().collect();
    names.sort();
    for name in &names {
        ensure!(a.get(*name) == b.get(*name), "{name} differs between runs");
    }
    Ok(format!("{} artifacts byte-identical", names.len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "worked example", worked_example),
        (2, "reachability oracle", reachability_oracle),
        (3, "vote exhaustiveness", vote_exhaustiveness),
        (4, "BLEU oracle", bleu_oracle),
        (5, "metrics identities", metrics_identities),
        (6, "ground-truth monotonicity", ground_truth_monotonicity),
        (7, "synthetic discrimination", synthetic_discrimination),
        (8, "latency bound", latency),
        (9, "determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (n, name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS criterion {n} ({name}): {detail}"),
            Err(why) => {
                println!("FAIL criterion {n} ({name}): {why}");
                failed.push(n);
            }
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
