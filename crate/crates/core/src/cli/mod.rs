//! The `imulab` command line: `simulate`, `estimate`, `propagate`, `report`.
//!
//! Every command reads an [`ExperimentConfig`] (built-in defaults, or JSON via
//! `--config`) with flag overrides, and writes into the output directory:
//!
//! ```text
//! <out>/manifest.json, <out>/imuNN.csv, <out>/config.json   simulate
//! <out>/estimate/...                                        estimate
//! <out>/propagate/...                                       propagate
//! <out>/report.json                                         report
//! ```

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{
    cmd_estimate, cmd_propagate, cmd_report, cmd_simulate, EstimatesFile, PropagationSummary, SensorEstimateRecord,
};
pub use config::{preset_params, DataSource, ExperimentConfig, Preset, SensorParamsConfig};

use crate::dataio::ReportFormat;
use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "imulab", version, about = "Inertial sensor array experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of sensors K.
    #[arg(long, global = true)]
    pub sensors: Option<usize>,
    /// Sample rate in Hz.
    #[arg(long, global = true)]
    pub rate: Option<f64>,
    /// Recording length in seconds.
    #[arg(long, global = true)]
    pub duration: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = ["csv", "json"])]
    pub format: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Write synthetic per-sensor recordings and a manifest.
    Simulate,
    /// Bias/noise estimates, series, densities, std profiles, evaluation matrix.
    Estimate,
    /// Mean-error and uncertainty propagation for K=1 and K=K_max.
    Propagate,
    /// Bundle previous outputs into report.json.
    Report,
}

impl Cli {
    /// Config file (or built-in defaults) with flag overrides applied.
    pub fn resolve_config(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::builtin(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(k) = self.sensors {
            config.sensors = k;
        }
        if let Some(rate) = self.rate {
            config.rate_hz = rate;
        }
        if let Some(d) = self.duration {
            config.duration_s = d;
        }
        if let Some(out) = &self.out {
            config.out_dir = out.clone();
        }
        if let Some(f) = &self.format {
            config.format = f.parse::<ReportFormat>()?;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Caps the global rayon pool from `IMULAB_THREADS` (unset or 0 = auto).
pub fn init_threads() -> Result<()> {
    let Ok(value) = std::env::var("IMULAB_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("IMULAB_THREADS must be a count, got {value:?}")))?;
    if n > 0 {
        // a pool that is already built (tests, embedding) is left as is
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    init_threads()?;
    let config = cli.resolve_config()?;
    match cli.command {
        Command::Simulate => cmd_simulate(&config),
        Command::Estimate => cmd_estimate(&config),
        Command::Propagate => cmd_propagate(&config),
        Command::Report => cmd_report(&config),
    }
}
