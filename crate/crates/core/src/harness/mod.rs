//! Experiment orchestration: chronological splits, sweeps over the decode
//! knobs, cost-ratio measurement, calibration and accuracy/speed tables.

mod run;
mod spec;
mod tables;

pub use run::{determinism_digest, prepare, run_experiment, run_point, PreparedData, RunResult, SplitBounds, SweepPoint};
pub use spec::{CostSpec, DatasetSpec, ExperimentSpec, Splits, SweepAxes};
pub use tables::{CALIBRATION_GAP, SATURATION_ALPHA, calibrate, calibration_text, saturation_point, tradeoff_table, tradeoff_text, CalibrationRow, TradeoffRow};

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::engine::EngineError;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("no target_only baseline row in the results")]
    MissingBaseline,
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
