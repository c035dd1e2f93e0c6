//! Report plumbing: CSV bodies are deterministic functions of the
//! configuration and seed; timestamps and timings live only in the JSON
//! metadata. Nothing is written until a command has finished computing.

use anyhow::{Context, Result};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

/// Run metadata attached to every JSON report.
#[derive(Debug, Serialize)]
pub struct Metadata {
    /// Subcommand name.
    pub command: String,
    /// Crate version.
    pub version: &'static str,
    /// Master seed.
    pub seed: u64,
    /// Whether `--force` was given.
    pub forced: bool,
    /// Set when forced runs may leave the supported region `z < z₀`.
    pub unsupported: bool,
    /// Whether the parallel backend is compiled in.
    pub parallel: bool,
    /// Worker threads.
    pub threads: usize,
    /// Start time (seconds since the Unix epoch).
    pub started_unix: u64,
    /// Wall-clock duration.
    pub wallclock_ms: u128,
}

impl Metadata {
    pub fn new(command: &str, seed: u64, forced: bool, started: SystemTime, wallclock_ms: u128) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            forced,
            unsupported: forced,
            parallel: contact_kk::par::is_parallel(),
            threads: rayon::current_num_threads(),
            started_unix: started.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            wallclock_ms,
        }
    }
}

/// A finished command: CSV table, JSON body and verdict.
pub struct Report {
    /// File stem (`<stem>.csv`, `<stem>.json`).
    pub stem: &'static str,
    /// CSV header.
    pub header: Vec<&'static str>,
    /// CSV rows.
    pub rows: Vec<Vec<String>>,
    /// Command-specific JSON payload.
    pub body: serde_json::Value,
    /// Whether every check of the command passed.
    pub passed: bool,
}

/// `Display` formatting of a float (shortest round-trip representation).
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// The CSV text of a report.
pub fn csv_text(report: &Report) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&report.header)?;
    for row in &report.rows {
        w.write_record(row)?;
    }
    Ok(String::from_utf8(w.into_inner().context("flushing CSV")?)?)
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`; returns the paths.
pub fn write(dir: &Path, report: &Report, meta: &Metadata, config: &impl Serialize) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let csv_path = dir.join(format!("{}.csv", report.stem));
    let json_path = dir.join(format!("{}.json", report.stem));
    let json = serde_json::json!({
        "metadata": meta,
        "config": config,
        "passed": report.passed,
        "report": report.body,
    });
    std::fs::write(&csv_path, csv_text(report)?).with_context(|| format!("writing {}", csv_path.display()))?;
    std::fs::write(&json_path, serde_json::to_string_pretty(&json)? + "\n")
        .with_context(|| format!("writing {}", json_path.display()))?;
    Ok((csv_path, json_path))
}
