use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ProbError, Result};

/// Variances below this are clamped on construction.
pub const VARIANCE_FLOOR: f64 = 1e-12;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Diagonal Gaussian next-patch density `N(mean, diag(variance))`.
///
/// Isotropic heads store one variance broadcast to every dimension and keep
/// the flag so callers can tell the two apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianHead {
    mean: Vec<f64>,
    variance: Vec<f64>,
    isotropic: bool,
}

fn checked_variance(v: f64) -> Result<f64> {
    if !v.is_finite() || v < 0.0 {
        return Err(ProbError::InvalidParameter(format!("variance {v} is not a positive finite value")));
    }
    if v < VARIANCE_FLOOR {
        log::warn!("variance {v:e} clamped to {VARIANCE_FLOOR:e}");
        return Ok(VARIANCE_FLOOR);
    }
    Ok(v)
}

fn checked_mean(mean: &[f64]) -> Result<()> {
    if mean.is_empty() {
        return Err(ProbError::InvalidParameter("empty mean vector".into()));
    }
    if let Some(bad) = mean.iter().find(|m| !m.is_finite()) {
        return Err(ProbError::InvalidParameter(format!("mean entry {bad} is not finite")));
    }
    Ok(())
}

impl GaussianHead {
    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Result<Self> {
        checked_mean(&mean)?;
        let v = checked_variance(variance)?;
        let d = mean.len();
        Ok(Self { mean, variance: vec![v; d], isotropic: true })
    }

    pub fn diagonal(mean: Vec<f64>, variance: Vec<f64>) -> Result<Self> {
        checked_mean(&mean)?;
        if variance.len() != mean.len() {
            return Err(ProbError::DimensionMismatch { expected: mean.len(), found: variance.len() });
        }
        let variance = variance.into_iter().map(checked_variance).collect::<Result<Vec<_>>>()?;
        Ok(Self { mean, variance, isotropic: false })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    pub fn is_isotropic(&self) -> bool {
        self.isotropic
    }

    /// True when both heads carry bit-identical variance vectors.
    pub fn shares_variance_with(&self, other: &GaussianHead) -> bool {
        self.variance == other.variance
    }

    pub fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(ProbError::DimensionMismatch { expected: self.dim(), found: len });
        }
        Ok(())
    }

    /// `sum_i -0.5 ln(2 pi s_i^2) - (x_i - m_i)^2 / (2 s_i^2)`.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(self.log_density_unchecked(x))
    }

    pub(crate) fn log_density_unchecked(&self, x: &[f64]) -> f64 {
        if self.isotropic {
            let v = self.variance[0];
            let ss: f64 = x.iter().zip(&self.mean).map(|(xi, mi)| (xi - mi) * (xi - mi)).sum();
            return -0.5 * self.dim() as f64 * (LN_2PI + v.ln()) - ss / (2.0 * v);
        }
        let mut acc = 0.0;
        for ((xi, mi), vi) in x.iter().zip(&self.mean).zip(&self.variance) {
            let r = xi - mi;
            acc -= 0.5 * (LN_2PI + vi.ln()) + r * r / (2.0 * vi);
        }
        acc
    }

    /// Density of a 1-d head at `x`; used by quadrature code.
    pub fn pdf_1d(&self, x: f64) -> f64 {
        debug_assert_eq!(self.dim(), 1);
        let v = self.variance[0];
        let r = x - self.mean[0];
        (-(r * r) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.variance)
            .map(|(m, v)| {
                let z: f64 = rng.sample(StandardNormal);
                m + v.sqrt() * z
            })
            .collect()
    }

    pub fn max_std(&self) -> f64 {
        self.variance.iter().cloned().fold(0.0, f64::max).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar_log_pdf(mu: f64, var: f64, x: f64) -> f64 {
        let sd = var.sqrt();
        let z = (x - mu) / sd;
        (1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt()) * (-0.5 * z * z).exp()).ln()
    }

    #[test]
    fn standard_normal_mode() {
        let h = GaussianHead::isotropic(vec![0.0], 1.0).unwrap();
        assert!((h.log_density(&[0.0]).unwrap() + 0.918_938_533_204_672_7).abs() < 1e-12);
    }

    #[test]
    fn bivariate_mode() {
        let h = GaussianHead::isotropic(vec![0.0, 0.0], 1.0).unwrap();
        assert!((h.log_density(&[0.0, 0.0]).unwrap() + 1.837_877_066_409_345_5).abs() < 1e-12);
    }

    #[test]
    fn matches_scalar_formula() {
        let h = GaussianHead::isotropic(vec![1.0], 0.25).unwrap();
        let expected = scalar_log_pdf(1.0, 0.25, 1.5);
        assert!((h.log_density(&[1.5]).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let h = GaussianHead::isotropic(vec![0.0, 0.0], 1.0).unwrap();
        assert!(matches!(h.log_density(&[0.0]), Err(ProbError::DimensionMismatch { .. })));
    }

    #[test]
    fn rejects_bad_parameters_and_clamps_tiny_variance() {
        assert!(GaussianHead::isotropic(vec![f64::NAN], 1.0).is_err());
        assert!(GaussianHead::isotropic(vec![0.0], -1.0).is_err());
        assert!(GaussianHead::isotropic(vec![0.0], f64::INFINITY).is_err());
        let h = GaussianHead::isotropic(vec![0.0], 0.0).unwrap();
        assert_eq!(h.variance()[0], VARIANCE_FLOOR);
        assert!(h.log_density(&[1.0]).unwrap().is_finite());
        assert!(GaussianHead::diagonal(vec![0.0, 1.0], vec![1.0]).is_err());
    }

    proptest! {
        #[test]
        fn translation_invariance(
            mu in prop::collection::vec(-5.0f64..5.0, 3),
            x in prop::collection::vec(-5.0f64..5.0, 3),
            var in prop::collection::vec(0.05f64..4.0, 3),
            delta in -10.0f64..10.0,
        ) {
            let a = GaussianHead::diagonal(mu.clone(), var.clone()).unwrap();
            let b = GaussianHead::diagonal(mu.iter().map(|m| m + delta).collect(), var).unwrap();
            let xs: Vec<f64> = x.iter().map(|v| v + delta).collect();
            let la = a.log_density(&x).unwrap();
            let lb = b.log_density(&xs).unwrap();
            prop_assert!((la - lb).abs() <= 1e-12 * la.abs().max(1.0));
        }
    }
}
