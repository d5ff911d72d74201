//! Command-line front end: TOML configs in, CSV and JSON out.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 run error,
//! failed fit, or an unsafe run.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use etsafe_core::taumodel::{Basis, Statistic};
use thiserror::Error;

pub use commands::Overrides;
pub use config::ScenarioConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("run error: {0}")]
    Run(String),
    #[error("unsafe run: {0}")]
    Unsafe(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 3,
        }
    }
}

impl From<etsafe_core::Error> for CliError {
    fn from(e: etsafe_core::Error) -> Self {
        match e {
            etsafe_core::Error::Config(_) | etsafe_core::Error::Dimension { .. } => {
                CliError::Config(e.to_string())
            }
            other => CliError::Run(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "etsafe", version, about = "Event-triggered safety simulations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct RunFlags {
    /// Replace the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replace the config's horizon (normalized time units).
    #[arg(long)]
    pub horizon: Option<f64>,
}

impl From<&RunFlags> for Overrides {
    fn from(f: &RunFlags) -> Self {
        Overrides {
            seed: f.seed,
            horizon: f.horizon,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BasisArg {
    PiecewiseLinear,
    Polynomial,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StatisticArg {
    Median,
    Mean,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario; writes trajectory.csv, events.csv and summary.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
        /// Maneuver model; overrides tau.model from the config.
        #[arg(long)]
        tau_model: Option<PathBuf>,
    },
    /// Sample inter-event times over a radius grid into a CSV file.
    SampleTau {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Samples per radius.
        #[arg(long)]
        n: Option<usize>,
        /// Comma-separated radii.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        /// Censoring time.
        #[arg(long)]
        max_time: Option<f64>,
    },
    /// Fit a tau model to a sample file; writes JSON.
    FitTau {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "piecewise-linear")]
        basis: BasisArg,
        /// Polynomial degree.
        #[arg(long, default_value_t = 3)]
        degree: usize,
        /// Per-level statistic that is fitted.
        #[arg(long, value_enum, default_value = "median")]
        statistic: StatisticArg,
    },
    /// Run greedy and maneuver on the same seed and horizon and report both.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        tau_model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Check a config without running it.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        tau_model: Option<PathBuf>,
    },
}

/// Logging to stderr at the level named by `ETSAFE_LOG_LEVEL` (error, info
/// or debug; info when unset).
pub fn init_logging() {
    let raw = std::env::var("ETSAFE_LOG_LEVEL").unwrap_or_default();
    let level = match raw.trim().to_ascii_lowercase().as_str() {
        "error" => log::LevelFilter::Error,
        "debug" => log::LevelFilter::Debug,
        "info" | "" => log::LevelFilter::Info,
        other => {
            eprintln!("etsafe: unknown ETSAFE_LOG_LEVEL {other:?}, using info");
            log::LevelFilter::Info
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate {
            config,
            out,
            flags,
            tau_model,
        } => commands::simulate(config, out, flags.into(), tau_model.as_deref()),
        Command::SampleTau {
            config,
            out,
            seed,
            n,
            grid,
            max_time,
        } => commands::sample_tau(
            config,
            out,
            commands::SampleOverrides {
                seed: *seed,
                n: *n,
                grid: grid.clone(),
                max_time: *max_time,
            },
        ),
        Command::FitTau {
            samples,
            out,
            basis,
            degree,
            statistic,
        } => {
            let basis = match basis {
                BasisArg::PiecewiseLinear => Basis::PiecewiseLinear,
                BasisArg::Polynomial => Basis::Polynomial { degree: *degree },
            };
            let statistic = match statistic {
                StatisticArg::Median => Statistic::Median,
                StatisticArg::Mean => Statistic::Mean,
            };
            commands::fit_tau(samples, out, basis, statistic)
        }
        Command::Compare {
            config,
            tau_model,
            out,
            flags,
        } => commands::compare(config, tau_model.as_deref(), out, flags.into()),
        Command::ValidateConfig { config, tau_model } => {
            let line = commands::validate_config(config, tau_model.as_deref())?;
            println!("{line}");
            Ok(())
        }
    }
}
