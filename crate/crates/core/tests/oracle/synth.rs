//! Synthetic functions with planted ground truth.

use rand::Rng;
use vulntrust_core::lines::{Ensemble, FunctionRecord, Label, LineClassifier, StubClassifier};
use vulntrust_core::{ExplanationEntry, LineId};

/// Lines 3-6 hold the length check and the copy; lines 7-10 form a branch
/// that no dependency connects back to the copy.
pub fn source(name: &str) -> String {
    format!(
        "void {name}(int n)\n\
         {{\n\
         \x20   int len = n;\n\
         \x20   if (len > 64)\n\
         \x20       len = 64;\n\
         \x20   memcpy(buf, src, len);\n\
         \x20   if (mode)\n\
         \x20       log_info(tag);\n\
         \x20   count = count + 1;\n\
         \x20   total = 0;\n\
         }}\n"
    )
}

pub const VULNERABLE: [u32; 4] = [3, 4, 5, 6];
pub const BRANCH: [u32; 4] = [7, 8, 9, 10];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Planted {
    /// Weight on the length check and the copy.
    Focused,
    /// Weight on the unrelated branch.
    Scattered,
}

fn entries(heavy: &[u32], light: &[u32], rng: &mut impl Rng) -> Vec<ExplanationEntry> {
    let mut out = Vec::new();
    for &l in heavy {
        out.push((l, rng.gen_range(0.15..0.3)));
    }
    for &l in light {
        out.push((l, rng.gen_range(0.0..0.05)));
    }
    out.sort_by_key(|e| e.0);
    out.into_iter().map(|(l, score)| ExplanationEntry { line: LineId::new(l).unwrap(), score }).collect()
}

pub fn record(name: &str, planted: Planted, confidence: f64, rng: &mut impl Rng) -> FunctionRecord {
    let explanation = match planted {
        Planted::Focused => entries(&VULNERABLE, &BRANCH, rng),
        Planted::Scattered => entries(&BRANCH, &VULNERABLE, rng),
    };
    FunctionRecord {
        function_id: name.into(),
        source: source(name),
        label: Label::Vulnerable,
        diff: None,
        vul_lines: Some(VULNERABLE.iter().map(|&l| LineId::new(l).unwrap()).collect()),
        explanation: Some(explanation),
        confidence: Some(confidence),
    }
}

/// Three stubs that call every line benign except the copy.
pub fn stub_ensemble() -> Ensemble {
    let stub = StubClassifier::constant("stub", 0.9).with("memcpy(buf, src, len);", 0.1);
    Ensemble::new(vec![LineClassifier::Stub(stub); 3])
}
