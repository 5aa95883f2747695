//! `hqlab`: runs one experiment per invocation and writes `report.json`, CSV
//! tables and binary fields into the output directory.
//!
//! Exit codes: 0 on success, 2 on validation errors, 3 on numerical non-convergence.

mod commands;
mod config;
mod report;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use config::{ExperimentConfig, Resolved, Subcommand};

#[derive(Debug)]
pub enum Failure {
    Validation(String),
    /// The computation ran but did not meet its tolerance; the report is still written.
    NonConvergence(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Validation(m) => write!(f, "validation error: {m}"),
            Self::NonConvergence(m) => write!(f, "non-convergence: {m}"),
        }
    }
}

impl From<hqlab::LabError> for Failure {
    fn from(e: hqlab::LabError) -> Self {
        use hqlab::LabError::*;
        match e {
            ZeroFinding(_) | Branch(_) => Self::NonConvergence(e.to_string()),
            _ => Self::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Validation(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "hqlab", version, about = "Experiments with quadratic quantities, commutators and H¹ factorization")]
struct Cli {
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// TOML experiment configuration; relative paths inside it resolve against its directory.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `io.output`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (cfg, base) = match &cli.config {
        Some(p) => (ExperimentConfig::load(p)?, p.parent().map(PathBuf::from).unwrap_or_default()),
        None => (ExperimentConfig::default(), PathBuf::from(".")),
    };
    let resolved = Resolved::new(&cfg, cli.subcommand, &base, cli.seed, cli.out)?;
    std::fs::create_dir_all(&resolved.out)?;
    let start = Instant::now();
    let outcome = commands::dispatch(&resolved)?;
    let elapsed = start.elapsed().as_secs_f64();
    report::write(&resolved, &cfg, &outcome.results, elapsed)?;
    for table in &outcome.tables {
        report::write_csv(&resolved.out, table)?;
    }
    match outcome.failure {
        Some(msg) => Err(Failure::NonConvergence(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("hqlab: {f}");
            ExitCode::from(match f {
                Failure::Validation(_) => 2,
                Failure::NonConvergence(_) => 3,
            })
        }
    }
}
