//! Batch front end: runs one command over a TOML configuration and writes a
//! CSV table plus a JSON report into the output directory.
//!
//! Exit codes: 0 pass, 1 internal error, 2 configuration error (including
//! grids that cannot resolve the requested regularization),
//! 3 solver non-convergence, 4 failed check or audit.

mod commands;
mod report;

use clap::{Parser, Subcommand};
use contact_kk::config::RunConfig;
use contact_kk::Error;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime};

/// Environment variable overriding the output directory (below `--out`).
const OUT_ENV: &str = "CONTACT_KK_OUT";

#[derive(Parser, Debug)]
#[command(name = "contact-kk", version, about = "Resolvent convergence studies for contact interactions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file (defaults apply when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the configuration and the environment).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master random seed (overrides the configuration).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Caps the number of worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Allows spectral parameters at or above z0 (results are labeled unsupported).
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Norm-resolvent distances between the regularized and limit resolvents.
    Converge,
    /// Ground energies with epsilon extrapolation.
    Spectrum,
    /// Audits of the operator-norm bounds.
    Bounds,
    /// Green's function tables.
    Kernels,
    /// Block formula against direct inversion.
    KkCheck,
    /// Trace and quadratic-form checks.
    Forms,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Converge => "converge",
            Command::Spectrum => "spectrum",
            Command::Bounds => "bounds",
            Command::Kernels => "kernels",
            Command::KkCheck => "kk-check",
            Command::Forms => "forms",
        }
    }
}

/// Exit code of a library error.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::AboveThreshold { .. }
        | Error::InvalidSpec(_)
        | Error::InvalidGrid(_)
        | Error::UnresolvedBump { .. }
        | Error::PotentialOverflowsBox { .. } => 2,
        Error::NoConvergence { .. } | Error::SeriesDiverging { .. } | Error::ShiftTooCloseToSpectrum { .. } => 3,
        _ => 1,
    }
}

fn run(cli: &Cli) -> Result<u8, (u8, String)> {
    let internal = |e: anyhow::Error| (1, format!("{e:#}"));
    let lib = |e: Error| (exit_code(&e), e.to_string());
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(lib)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global().map_err(|e| internal(e.into()))?;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let started = SystemTime::now();
    let clock = Instant::now();
    let report = match cli.command {
        Command::Converge => commands::converge(&cfg, cli.force),
        Command::Spectrum => commands::spectrum(&cfg),
        Command::Bounds => commands::bounds(&cfg),
        Command::Kernels => commands::kernels(&cfg),
        Command::KkCheck => commands::kk_check(&cfg, cli.force),
        Command::Forms => commands::forms(&cfg),
    }
    .map_err(lib)?;
    let meta = report::Metadata::new(cli.command.name(), cfg.seed, cli.force, started, clock.elapsed().as_millis());
    let (csv, json) = report::write(&out, &report, &meta, &cfg).map_err(internal)?;
    let verdict = if report.passed { "PASS" } else { "FAIL" };
    println!("{} {verdict}: {} {}", cli.command.name(), csv.display(), json.display());
    Ok(if report.passed { 0 } else { 4 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
