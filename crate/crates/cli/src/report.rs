//! `report.json` and CSV tables.

use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Resolved};
use crate::Failure;

/// A CSV table: file name, header and records.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip decimal form.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Serialize)]
struct Report<'a> {
    command: String,
    config_echo: Value,
    results: &'a Value,
    timings: Value,
    version: &'static str,
}

pub fn write(resolved: &Resolved, cfg: &ExperimentConfig, results: &Value, seconds: f64) -> Result<(), Failure> {
    let report = Report {
        command: resolved.subcommand.to_string(),
        config_echo: json!({ "file": cfg, "resolved": resolved }),
        results,
        timings: json!({ "total_seconds": seconds }),
        version: env!("CARGO_PKG_VERSION"),
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::Validation(e.to_string()))?;
    std::fs::write(resolved.out.join("report.json"), text + "\n")?;
    Ok(())
}

pub fn write_csv(dir: &Path, table: &Table) -> Result<(), Failure> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(dir.join(&table.name))
        .map_err(|e| Failure::Validation(e.to_string()))?;
    let io = |e: csv::Error| Failure::Validation(e.to_string());
    w.write_record(&table.header).map_err(io)?;
    for r in &table.rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
