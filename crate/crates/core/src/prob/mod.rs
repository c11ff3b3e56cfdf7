//! Probability kernel: Gaussian patch heads, log-domain acceptance, overlap
//! between target and draft, residual sampling and 1-d quadrature helpers.

mod acceptance;
mod head;
pub(crate) mod overlap;
pub mod quadrature;
mod residual;

pub use acceptance::{acceptance, log_ratio, AcceptanceDecision, AcceptanceRule, VarianceSharing};
pub use head::{GaussianHead, VARIANCE_FLOOR};
pub use overlap::{closed_form_overlap, overlap, OverlapKind, OverlapMethod, OverlapResult};
pub use quadrature::{tv_between_1d, GridSpec};
pub use residual::{residual_sample, ResidualDraw, MAX_RESIDUAL_DRAWS};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid head parameter: {0}")]
    InvalidParameter(String),
    #[error("tolerance lambda must be positive and finite, got {0}")]
    NonPositiveTolerance(f64),
    #[error("shared-variance mode requires equal target and draft variances")]
    VarianceMismatch,
    #[error("unsupported overlap method: {0}")]
    UnsupportedMethod(String),
    #[error("residual undefined / cost unbounded: heads are numerically identical (overlap {beta})")]
    ResidualUndefined { beta: f64 },
    #[error("residual sampler exceeded {draws} target draws")]
    ResidualCostExceeded { draws: usize },
    #[error("quadrature grid does not cover the densities (masses {mass_a:.6}, {mass_b:.6})")]
    GridCoverage { mass_a: f64, mass_b: f64 },
}

pub type Result<T> = std::result::Result<T, ProbError>;

/// Standard normal cdf.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}
