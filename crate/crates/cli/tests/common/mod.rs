//! Helpers shared by the command-line test targets.
#![allow(dead_code)]

#[path = "../../../core/tests/oracle/mod.rs"]
pub mod oracle;

use std::path::{Path, PathBuf};
use std::process::Command;

use vulntrust_core::lines::{FunctionRecord, LineClassifier, StubClassifier};

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn run<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    run_with_env(args, &[])
}

pub fn run_with_env<I, S>(args: I, env: &[(&str, &str)]) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vulntrust"));
    cmd.args(args).env_remove("VULNTRUST_ADAPTERS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    Output {
        code: out.status.code().expect("exited normally"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

/// Writes each member to its own file and lists them in a manifest.
pub fn write_models(dir: &Path, members: &[LineClassifier]) {
    std::fs::create_dir_all(dir).unwrap();
    let mut entries = Vec::new();
    for (i, m) in members.iter().enumerate() {
        let file = format!("member{i}.json");
        std::fs::write(dir.join(&file), m.to_json()).unwrap();
        entries.push(serde_json::json!({ "name": format!("member{i}"), "file": file }));
    }
    let manifest = serde_json::json!({ "schema_version": "1.0", "models": entries });
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
}

/// Three stubs that vote every line benign except `line`.
pub fn stub_models(dir: &Path, line: &str) {
    let stub = StubClassifier::constant("stub", 0.9).with(line, 0.1);
    write_models(dir, &vec![LineClassifier::Stub(stub); 3]);
}

pub fn vrrp_models(dir: &Path) {
    let source = std::fs::read_to_string(fixture("vrrp_print_data.c")).unwrap();
    stub_models(dir, source.lines().nth(6).unwrap());
}

pub fn write_corpus(path: &Path, records: &[FunctionRecord]) {
    let text: String = records.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect();
    std::fs::write(path, text).unwrap();
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}
