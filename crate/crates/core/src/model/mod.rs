//! Series ingestion, patch tokenization and the linear forecasters used as
//! target and draft models.

mod data;
mod forecast;
mod history;
mod kernel;
mod metrics;
mod patch;
pub mod synthetic;

pub use data::{load_csv, write_csv, CsvSchema, RawSeries};
pub use forecast::{fit_linear_ar, HeadOverrides, ForecastModel, ModelKind};
pub use history::History;
pub use metrics::{metrics, Metrics};
pub use patch::{NormStats, PatchSeries};

use thiserror::Error;

use crate::prob::ProbError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: line {line}: {message}")]
    Parse { path: String, line: u64, message: String },
    #[error("{0}: no data rows")]
    Empty(String),
    #[error("column {0:?} not found in header")]
    MissingColumn(String),
    #[error("insufficient data: need {needed} patches per channel, have {available}")]
    InsufficientData { needed: usize, available: usize },
    #[error("normal equations are singular with ridge = 0; use a ridge penalty > 0")]
    Singular,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

pub type Result<T> = std::result::Result<T, ModelError>;
