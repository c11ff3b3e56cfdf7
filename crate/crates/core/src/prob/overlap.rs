use serde::{Deserialize, Serialize};

use super::quadrature::{integrate, GridSpec};
use super::{normal_cdf, GaussianHead, ProbError, Result};
use crate::rng::{Purpose, RngStreams};

/// How to compute `beta = integral min{p, q}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapMethod {
    /// `2 Phi(-Delta / 2)` with `Delta` the Mahalanobis gap; needs equal variances.
    ClosedFormEqualCov,
    /// Adaptive quadrature of `min{p, q}`; 1-d only.
    NumericQuadrature1d,
    /// Average of `min{1, p/q}` over `samples` draws from `q`.
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapKind {
    ClosedFormEqualCov,
    NumericQuadrature1d,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapResult {
    pub beta: f64,
    pub method: OverlapKind,
    /// Present only for Monte Carlo estimates.
    pub std_error: Option<f64>,
}

/// `2 Phi(-Delta/2)`, `Delta^2 = (mu_p - mu_q)^T S^-1 (mu_p - mu_q)`.
pub fn closed_form_overlap(p: &GaussianHead, q: &GaussianHead) -> Result<f64> {
    q.check_dim(p.dim())?;
    if !p.shares_variance_with(q) {
        return Err(ProbError::UnsupportedMethod(
            "closed_form_equal_cov requires equal target and draft variances".into(),
        ));
    }
    let delta2: f64 = p
        .mean()
        .iter()
        .zip(q.mean())
        .zip(p.variance())
        .map(|((a, b), v)| (a - b) * (a - b) / v)
        .sum();
    Ok((2.0 * normal_cdf(-delta2.sqrt() / 2.0)).min(1.0))
}

/// Points where `lambda * p(x) = q(x)` for two 1-d Gaussian heads.
pub(crate) fn crossings_1d(p: &GaussianHead, q: &GaussianHead, log_lambda: f64) -> Vec<f64> {
    let (mp, vp) = (p.mean()[0], p.variance()[0]);
    let (mq, vq) = (q.mean()[0], q.variance()[0]);
    // (x-mp)^2/vp - (x-mq)^2/vq + ln(vp/vq) - 2 ln(lambda) = 0
    let a = 1.0 / vp - 1.0 / vq;
    let b = -2.0 * (mp / vp - mq / vq);
    let c = mp * mp / vp - mq * mq / vq + (vp / vq).ln() - 2.0 * log_lambda;
    if a == 0.0 {
        return if b == 0.0 { vec![] } else { vec![-c / b] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let s = disc.sqrt();
    vec![(-b - s) / (2.0 * a), (-b + s) / (2.0 * a)]
}

pub fn overlap(p: &GaussianHead, q: &GaussianHead, method: OverlapMethod) -> Result<OverlapResult> {
    q.check_dim(p.dim())?;
    match method {
        OverlapMethod::ClosedFormEqualCov => Ok(OverlapResult {
            beta: closed_form_overlap(p, q)?,
            method: OverlapKind::ClosedFormEqualCov,
            std_error: None,
        }),
        OverlapMethod::NumericQuadrature1d => {
            if p.dim() != 1 {
                return Err(ProbError::UnsupportedMethod(format!(
                    "numeric_quadrature_1d requires d = 1, got d = {}",
                    p.dim()
                )));
            }
            let grid = GridSpec::covering_heads(&[p, q]);
            let beta = integrate(|x| p.pdf_1d(x).min(q.pdf_1d(x)), &grid, &crossings_1d(p, q, 0.0), 1e-10);
            Ok(OverlapResult { beta: beta.clamp(0.0, 1.0), method: OverlapKind::NumericQuadrature1d, std_error: None })
        }
        OverlapMethod::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(ProbError::UnsupportedMethod("monte_carlo needs at least 2 samples".into()));
            }
            let mut rng = RngStreams::new(seed).stream(0, 0, Purpose::Estimator);
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..samples {
                let x = q.sample(&mut rng);
                let a = (p.log_density_unchecked(&x) - q.log_density_unchecked(&x)).min(0.0).exp();
                sum += a;
                sum_sq += a * a;
            }
            let n = samples as f64;
            let mean = sum / n;
            let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
            Ok(OverlapResult { beta: mean, method: OverlapKind::MonteCarlo, std_error: Some((var / n).sqrt()) })
        }
    }
}
