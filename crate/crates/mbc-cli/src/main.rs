//! `mbc`: experiment runner for the model-based V2X communication
//! simulator.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical
//! failure.

mod config;
mod output;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;

/// Error classified by exit code.
#[derive(Debug)]
pub enum AppError {
    Config(anyhow::Error),
    Data(anyhow::Error),
    Numerical(anyhow::Error),
}

impl From<mbc::Error> for AppError {
    fn from(e: mbc::Error) -> AppError {
        use mbc::Error::*;
        match e {
            InvalidParameter { .. } | EmptyBounds(_) => AppError::Config(e.into()),
            MalformedTrace { .. } | EmptyTrace | NonMonotoneTimestamp { .. }
            | TooFewSamples { .. } | Io(_) | Csv(_) => AppError::Data(e.into()),
            CholeskyFailure { .. } => AppError::Numerical(e.into()),
        }
    }
}

impl AppError {
    fn exit_code(&self) -> u8 {
        match self {
            AppError::Config(_) => 1,
            AppError::Data(_) => 2,
            AppError::Numerical(_) => 3,
        }
    }

    fn inner(&self) -> &anyhow::Error {
        match self {
            AppError::Config(e) | AppError::Data(e) | AppError::Numerical(e) => e,
        }
    }
}

#[derive(Parser)]
#[command(name = "mbc", version, about = "Hybrid GP model-based communication simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (threshold, PER) cell and write full artifacts, including
    /// per-instant PTE, message, and decision series.
    Run(RunArgs),
    /// Run every cell and write the summary tables only.
    Sweep(RunArgs),
    /// Generate a synthetic trace as an ENU CSV file.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trace CSV (`t,x,y` or `t,lat,lon,alt`, detected from the header).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Bundled scenario: cruise, lane-change, hard-brake, mixed-demo.
    #[arg(long)]
    scenario: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed for trace noise and per-cell channel seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated PTE thresholds in meters.
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    /// Comma-separated packet error ratios in [0, 1].
    #[arg(long, value_delimiter = ',')]
    pers: Option<Vec<f64>>,
}

#[derive(Args)]
struct SynthArgs {
    /// Bundled scenario: cruise, lane-change, hard-brake, mixed-demo.
    #[arg(long, default_value = "mixed-demo")]
    scenario: String,
    /// Output CSV path.
    #[arg(long, default_value = "trace.csv")]
    out: PathBuf,
    /// Seed for trace noise.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Duration override in seconds (default: the scenario's own length).
    #[arg(long)]
    duration: Option<f64>,
    /// Sample rate in Hz.
    #[arg(long, default_value_t = 10.0)]
    rate_hz: f64,
    /// GPS noise standard deviation override in meters.
    #[arg(long)]
    noise_std: Option<f64>,
}

fn resolve_config(args: &RunArgs) -> Result<ExperimentConfig, AppError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(trace) = &args.trace {
        cfg.trace = Some(trace.clone());
        cfg.scenario = None;
    }
    if let Some(scenario) = &args.scenario {
        cfg.scenario = Some(scenario.clone());
        cfg.trace = None;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(thresholds) = &args.thresholds {
        cfg.thresholds_m = thresholds.clone();
    }
    if let Some(pers) = &args.pers {
        cfg.pers = pers.clone();
    }
    Ok(cfg)
}

fn run() -> Result<(), AppError> {
    let cli = Cli::try_parse().map_err(|e| {
        // clap usage problems are configuration errors; --help/--version are
        // not errors at all.
        if e.use_stderr() {
            AppError::Config(anyhow::anyhow!(e.to_string()))
        } else {
            print!("{e}");
            std::process::exit(0);
        }
    })?;

    match cli.command {
        Command::Run(args) => runner::cmd_run(&resolve_config(&args)?),
        Command::Sweep(args) => runner::cmd_sweep(&resolve_config(&args)?),
        Command::Synth(args) => runner::cmd_synth(
            &args.scenario,
            &args.out,
            args.seed,
            args.duration,
            args.rate_hz,
            args.noise_std,
        ),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.inner());
            ExitCode::from(e.exit_code())
        }
    }
}
