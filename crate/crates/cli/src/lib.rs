//! Experiment runner: reads a TOML config, runs one experiment family and
//! writes `report.json`, `timing.json` and CSV tables.

pub mod config;
pub mod error;
pub mod experiments;
pub mod report;

use std::fs;
use std::path::PathBuf;

use clap::Parser;

pub use config::{Experiment, ExperimentConfig, Overrides};
pub use error::CliError;
pub use report::Report;

#[derive(Debug, Parser)]
#[command(name = "hum", version, about = "Duality, observability and controllability experiments")]
pub struct Cli {
    /// Experiment family to run.
    #[arg(value_enum)]
    pub experiment: Experiment,
    /// TOML configuration file; defaults describe the 1D instance m=15, K=6.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (default `hum-out/<experiment>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `control.tol` from the config.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Suppress the summary on stdout.
    #[arg(long)]
    pub quiet: bool,
    /// Exit with status 4 when any check fails.
    #[arg(long)]
    pub check: bool,
}

/// Parses the configuration, runs the experiment and writes its outputs.
pub fn run(cli: &Cli) -> Result<Report, CliError> {
    let text = match &cli.config {
        Some(path) => fs::read_to_string(path).map_err(|e| CliError::io(path, e))?,
        None => String::new(),
    };
    let overrides = Overrides { seed: cli.seed, tol: cli.tol };
    let cfg = ExperimentConfig::parse(cli.experiment, &text, overrides)?;
    let report = experiments::run(&cfg)?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("hum-out").join(cli.experiment.name()));
    report.write(&out)?;
    if !cli.quiet {
        print!("{}", report.summary());
        println!("  outputs in {}", out.display());
    }
    if cli.check {
        let failed = report.failed_checks();
        if !failed.is_empty() {
            return Err(CliError::Checks(failed));
        }
    }
    Ok(report)
}
