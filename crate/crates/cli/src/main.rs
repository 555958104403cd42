//! `vulntrust`: trust assessment of vulnerability-detector explanations.
//!
//! Exit codes: 0 trustworthy or success, 10 untrustworthy, 2 error.

mod commands;
mod models;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use settings::ConfigArgs;

pub const EXIT_OK: u8 = 0;
pub const EXIT_UNTRUSTWORTHY: u8 = 10;
pub const EXIT_ERROR: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "vulntrust", version, about = "Assess whether a vulnerability prediction can be trusted")]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the line dataset from JSONL function corpora
    Ingest {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Train the line classifiers on a dataset
    Train {
        dataset: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Assess one prediction; exits 10 when untrustworthy
    Assess {
        source: PathBuf,
        explanation: PathBuf,
        #[arg(long)]
        models: Option<PathBuf>,
        /// Dependency graph to use instead of parsing the source
        #[arg(long, value_name = "FILE")]
        import_pdg: Option<PathBuf>,
        /// Write the assessment here instead of standard output
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Evaluate a labelled corpus of predictions
    Evaluate {
        corpus: PathBuf,
        #[arg(long)]
        models: Option<PathBuf>,
        /// Comma-separated IoU thresholds, one table each
        #[arg(long, value_delimiter = ',')]
        sweep: Vec<f64>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Render assessment records as text
    Report { assessments: Vec<PathBuf> },
}

/// The error and its causes, skipping causes already quoted by an outer
/// message.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if out.contains(&msg) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&msg);
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = cli.config.resolve(|k| std::env::var(k).ok()).and_then(|cfg| match cli.command {
        Command::Ingest { paths, out } => commands::ingest(&cfg, &paths, &out),
        Command::Train { dataset, out } => commands::train(&cfg, &dataset, &out),
        Command::Assess { source, explanation, models, import_pdg, out } => {
            commands::assess(&cfg, &source, &explanation, models.as_deref(), import_pdg.as_deref(), out.as_deref())
        }
        Command::Evaluate { corpus, models, sweep, out } => {
            commands::evaluate(&cfg, &corpus, models.as_deref(), &sweep, out.as_deref())
        }
        Command::Report { assessments } => commands::report(&assessments),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(EXIT_ERROR)
        }
    }
}
