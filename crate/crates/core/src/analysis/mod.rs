//! Closed-form performance laws, acceptance estimators with concentration
//! radii, deviation bounds and predictor reports.

mod bounds;
mod estimate;
mod laws;
mod report;

pub use bounds::{deviation_bounds, mean_acceptance, DeviationBounds};
pub use estimate::{estimate_alpha, AcceptanceEstimate, EstimateMode};
pub use laws::{
    block_length_pmf, dependence_interval, expected_block_length, horizon_tv_bound, lossless_worthwhile,
    ops_factor, select_gamma, speedup_wall, speedup_increases, GammaChoice, HorizonTv,
};
pub use report::{CostModel, CostSource, PredictorReport, PredictorSummary, ReportDeltas};
pub(crate) use report::render_table;

use thiserror::Error;

use crate::prob::ProbError;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no (target, draft) pairs supplied")]
    Empty,
    #[error("bound check failed: {0}")]
    BoundViolation(String),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

pub(crate) fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(AnalysisError::Domain(format!("{name} must lie in [0, 1], got {v}")))
    }
}

pub(crate) fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(AnalysisError::Domain(format!("{name} must be positive and finite, got {v}")))
    }
}
