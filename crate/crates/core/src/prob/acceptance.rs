use serde::{Deserialize, Serialize};

use super::{GaussianHead, ProbError, Result};

/// Whether target and draft must share their per-step variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceSharing {
    /// `p.variance == q.variance` is enforced and the log-normalizers cancel.
    #[default]
    Shared,
    /// Unequal diagonal variances; the `0.5 * sum ln(s_q^2 / s_p^2)` term is kept.
    Unequal,
}

/// Acceptance rule parameters for a session.
///
/// `tolerance_lambda` multiplies the density ratio, so in log space it adds
/// `ln(lambda)`. `lambda > 1` relaxes acceptance, `lambda < 1` tightens it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRule {
    pub tolerance_lambda: f64,
    pub variance_sharing: VarianceSharing,
}

impl Default for AcceptanceRule {
    fn default() -> Self {
        Self { tolerance_lambda: 1.0, variance_sharing: VarianceSharing::Shared }
    }
}

impl AcceptanceRule {
    pub fn new(tolerance_lambda: f64, variance_sharing: VarianceSharing) -> Result<Self> {
        if !(tolerance_lambda.is_finite() && tolerance_lambda > 0.0) {
            return Err(ProbError::NonPositiveTolerance(tolerance_lambda));
        }
        Ok(Self { tolerance_lambda, variance_sharing })
    }

    pub fn log_tolerance(&self) -> f64 {
        self.tolerance_lambda.ln()
    }

    /// `min(1, exp(log_ratio + ln lambda))`.
    pub fn alpha(&self, log_ratio: f64) -> f64 {
        let shifted = log_ratio + self.log_tolerance();
        if shifted >= 0.0 {
            1.0
        } else {
            shifted.exp()
        }
    }
}

/// Outcome of testing one drafted patch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceDecision {
    /// `log p(x) - log q(x)` in nats.
    pub log_ratio: f64,
    pub alpha: f64,
    pub accepted: bool,
    pub uniform_draw: f64,
}

/// `log p(x) - log q(x)`.
///
/// With shared variances the normalizers cancel and the ratio reduces to
/// `-(|x - mu_p|^2_S - |x - mu_q|^2_S) / 2` in the Mahalanobis norm of the
/// shared diagonal, which is the isotropic formula when all entries agree.
pub fn log_ratio(p: &GaussianHead, q: &GaussianHead, x: &[f64], sharing: VarianceSharing) -> Result<f64> {
    p.check_dim(x.len())?;
    q.check_dim(x.len())?;
    match sharing {
        VarianceSharing::Shared => {
            if !p.shares_variance_with(q) {
                return Err(ProbError::VarianceMismatch);
            }
            let mut dp = 0.0;
            let mut dq = 0.0;
            for (((xi, mp), mq), v) in x.iter().zip(p.mean()).zip(q.mean()).zip(p.variance()) {
                dp += (xi - mp) * (xi - mp) / v;
                dq += (xi - mq) * (xi - mq) / v;
            }
            Ok(-(dp - dq) / 2.0)
        }
        VarianceSharing::Unequal => Ok(p.log_density_unchecked(x) - q.log_density_unchecked(x)),
    }
}

pub fn acceptance(
    p: &GaussianHead,
    q: &GaussianHead,
    x: &[f64],
    rule: &AcceptanceRule,
    uniform_draw: f64,
) -> Result<AcceptanceDecision> {
    if !(rule.tolerance_lambda.is_finite() && rule.tolerance_lambda > 0.0) {
        return Err(ProbError::NonPositiveTolerance(rule.tolerance_lambda));
    }
    let log_ratio = log_ratio(p, q, x, rule.variance_sharing)?;
    let alpha = rule.alpha(log_ratio);
    Ok(AcceptanceDecision { log_ratio, alpha, accepted: uniform_draw < alpha, uniform_draw })
}
