//! `blowlab`: experiment driver for the blow-up laboratory.
//!
//! Usage: `blowlab <subcommand> --config <file> [--set key=value]... --out <dir>`.
//! Every run writes `manifest.json`, `results.csv`, `report.txt` and, where
//! a scaling law or trajectory is involved, `plots/*.svg`. The exit code
//! is zero exactly when every check in the manifest passes.

mod config;
mod output;
mod runner;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] blowlab_core::error::CoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Parser)]
#[command(name = "blowlab", version, about = "semilinear heat blow-up laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment configuration (defaults apply when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dotted-key override, e.g. --set grid.points=201 or --set p=1.5.
    #[arg(long = "set", global = true)]
    overrides: Vec<String>,
    /// Output directory for manifest, CSV, report, and plots.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble the discrete operator and verify its structural contracts.
    OperatorCheck,
    /// Probe the heat kernel: mass, positivity, Gaussian comparison.
    KernelCheck,
    /// Solve the Duhamel fixed-point problem on the guaranteed horizon.
    Picard,
    /// Method-of-lines run to a horizon or blow-up.
    Simulate,
    /// Sweep the forcing amplitude and measure blow-up times.
    BlowupScan,
    /// Sweep T (or R) and fit the functional scaling law.
    FunctionalScan,
    /// Print the closed-form exponents and critical bounds.
    ExponentTable,
    /// Weak-form residual of a mild solution under refinement.
    WeakResidual,
}

impl Command {
    fn kind(&self) -> &'static str {
        match self {
            Command::OperatorCheck => "operator-check",
            Command::KernelCheck => "kernel-check",
            Command::Picard => "picard",
            Command::Simulate => "simulate",
            Command::BlowupScan => "blowup-scan",
            Command::FunctionalScan => "functional-scan",
            Command::ExponentTable => "exponent-table",
            Command::WeakResidual => "weak-residual",
        }
    }
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let config = config::load(cli.config.as_deref(), &cli.overrides)?;
    #[cfg(feature = "parallel")]
    if let Some(workers) = config.workers {
        // Ignore the error from a pool that is already installed.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    let manifest = runner::run(cli.command.kind(), &config, &cli.out)?;
    for check in &manifest.checks {
        let verdict = if check.pass { "PASS" } else { "FAIL" };
        println!("{}: {verdict}", check.name);
    }
    println!(
        "{}: {} ({} checks, {:.2}s) -> {}",
        manifest.experiment,
        if manifest.pass { "PASS" } else { "FAIL" },
        manifest.checks.len(),
        manifest.wall_clock_seconds,
        cli.out.display()
    );
    Ok(manifest.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
