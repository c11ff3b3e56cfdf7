//! `patchspec` command-line entry point.
//!
//! Exit codes: 0 on success, 1 when a validation or (with `--strict`)
//! calibration check fails, 2 on usage or data errors.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use patchspec::engine::Variant;
use patchspec::validation::Suite;
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "patchspec", version, about = "Speculative decoding for patch-based time-series forecasters")]
struct Cli {
    /// Output directory for artifacts and manifests.
    #[arg(long, global = true, env = "PATCHSPEC_OUT", default_value = "patchspec-out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a ridge linear AR forecaster on a CSV and write it as JSON.
    Fit(FitArgs),
    /// Forecast past the end of a series with one decoding variant.
    Decode(DecodeArgs),
    /// Run an experiment spec: sweep, calibration and trade-off tables.
    Scan(ScanArgs),
    /// Rebuild the calibration table from a results file.
    Calibrate(CalibrateArgs),
    /// Run the statistical self-check suites.
    Validate(ValidateArgs),
    /// Evaluate the closed-form predictors for one operating point.
    Predict(PredictArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Timestamp column to skip; pass an empty string when there is none.
    #[arg(long, default_value = "date")]
    pub timestamp_col: String,
    /// Channel columns to read (comma separated); default is every other column.
    #[arg(long, value_delimiter = ',')]
    pub channels: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 16)]
    pub patch_len: usize,
    /// Lookback in patches.
    #[arg(long, default_value_t = 8)]
    pub lookback: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub ridge: f64,
    /// Capacity scale in (0, 1]; below 1 truncates the lookback.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Fraction of the series (from the start) used for fitting.
    #[arg(long, default_value_t = 0.7)]
    pub train_frac: f64,
    /// Override the fitted head scale.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Mean perturbation baked into the model.
    #[arg(long)]
    pub bias: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Artifact base name: writes `<name>.json` and `<name>.fit.json`.
    #[arg(long, default_value = "model")]
    pub name: String,
}

#[derive(Debug, Clone, Args)]
pub struct DecodeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub target: PathBuf,
    /// Draft model; defaults to the target (self-speculation).
    #[arg(long)]
    pub draft: Option<PathBuf>,
    #[arg(long, default_value = "practical")]
    pub variant: Variant,
    #[arg(long, default_value_t = 3)]
    pub gamma: usize,
    /// Shared head scale for both models.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Draft mean perturbation.
    #[arg(long)]
    pub bias: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub tolerance_lambda: f64,
    /// Horizon in timesteps.
    #[arg(long, default_value_t = 96)]
    pub horizon: usize,
    /// Timestep at which the history ends; defaults to the end of the series.
    #[arg(long)]
    pub end: Option<usize>,
    /// Give each model its own head scale instead of a shared one.
    #[arg(long)]
    pub unequal_variance: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    /// Experiment spec (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    /// Replace the sigma axis; the fitted scale is always kept.
    #[arg(long)]
    pub sigma: Vec<f64>,
    /// Replace the gamma axis.
    #[arg(long)]
    pub gamma: Vec<usize>,
    /// Replace the draft scale axis.
    #[arg(long)]
    pub scale: Vec<f64>,
    /// Replace the bias axis.
    #[arg(long)]
    pub bias: Vec<f64>,
    /// Replace the tolerance axis.
    #[arg(long)]
    pub tolerance_lambda: Vec<f64>,
    /// Replace the variant axis.
    #[arg(long)]
    pub variant: Vec<Variant>,
    /// Replace the seed list.
    #[arg(long)]
    pub seed: Vec<u64>,
    /// Exit with status 1 if any calibration row is flagged.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    /// Results file written by `scan`.
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Suites to run (repeatable); default is all of them.
    #[arg(long)]
    pub suite: Vec<Suite>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 3)]
    pub gamma: usize,
    /// Draft/target wall-clock cost ratio.
    #[arg(long, default_value_t = 0.25)]
    pub c: f64,
    /// Draft/target FLOP ratio; defaults to `c`.
    #[arg(long)]
    pub c_hat: Option<f64>,
    /// Upper end of the gamma scan.
    #[arg(long, default_value_t = 64)]
    pub gamma_max: usize,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid argument: {0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] patchspec::model::ModelError),
    #[error(transparent)]
    Engine(#[from] patchspec::engine::EngineError),
    #[error(transparent)]
    Analysis(#[from] patchspec::analysis::AnalysisError),
    #[error(transparent)]
    Harness(#[from] patchspec::harness::HarnessError),
    #[error(transparent)]
    Validation(#[from] patchspec::validation::ValidationError),
}

impl CliError {
    pub fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.display().to_string(), message: e.to_string() }
    }
}

/// Whether every check of a successful run passed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Passed,
    Failed,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(a) => commands::fit(&cli.out, a),
        Command::Decode(a) => commands::decode(&cli.out, a),
        Command::Scan(a) => commands::scan(&cli.out, a),
        Command::Calibrate(a) => commands::calibrate(&cli.out, a),
        Command::Validate(a) => commands::validate(&cli.out, a),
        Command::Predict(a) => commands::predict(&cli.out, a),
    };
    match result {
        Ok(Outcome::Passed) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
