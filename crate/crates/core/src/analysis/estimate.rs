use serde::{Deserialize, Serialize};

use super::{check_unit, AnalysisError, Result};
use crate::prob::{closed_form_overlap, log_ratio, GaussianHead, VarianceSharing};
use crate::rng::{Purpose, RngStreams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMode {
    /// Exact per-history overlap `2 Phi(-Delta_i / 2)`.
    ClosedForm,
    /// `m` draft proposals per history, averaging `min{1, p/q}`.
    MonteCarlo { per_history: usize, seed: u64 },
}

/// Held-out estimate of the mean acceptance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceEstimate {
    pub alpha_bar_hat: f64,
    pub n_histories: usize,
    /// `None` when each history's overlap was computed exactly.
    pub mc_per_history: Option<usize>,
}

impl AcceptanceEstimate {
    /// Effective sample count in the Hoeffding bound: `N` or `N m`.
    pub fn effective_samples(&self) -> f64 {
        self.n_histories as f64 * self.mc_per_history.unwrap_or(1) as f64
    }

    /// Half-width `sqrt(ln(2/delta) / (2 N m))` of the interval holding the
    /// true mean acceptance with probability at least `1 - delta`.
    pub fn hoeffding_radius(&self, delta: f64) -> Result<f64> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(AnalysisError::Domain(format!("confidence delta must lie in (0, 1), got {delta}")));
        }
        Ok(((2.0 / delta).ln() / (2.0 * self.effective_samples())).sqrt())
    }

    /// `2 exp(-2 N m eps^2)`, the tail probability of a deviation of `eps`.
    pub fn tail_bound(&self, eps: f64) -> f64 {
        (2.0 * (-2.0 * self.effective_samples() * eps * eps).exp()).min(1.0)
    }
}

/// Averages per-history acceptance over `(target, draft)` head pairs.
pub fn estimate_alpha(pairs: &[(GaussianHead, GaussianHead)], mode: EstimateMode) -> Result<AcceptanceEstimate> {
    if pairs.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let n = pairs.len();
    let (sum, per_history) = match mode {
        EstimateMode::ClosedForm => {
            let mut s = 0.0;
            for (p, q) in pairs {
                s += closed_form_overlap(p, q)?;
            }
            (s, None)
        }
        EstimateMode::MonteCarlo { per_history, seed } => {
            if per_history == 0 {
                return Err(AnalysisError::Domain("monte carlo needs at least one draw per history".into()));
            }
            let streams = RngStreams::new(seed);
            let mut s = 0.0;
            for (i, (p, q)) in pairs.iter().enumerate() {
                let mut rng = streams.stream(i as u64, 0, Purpose::Estimator);
                for _ in 0..per_history {
                    let x = q.sample(&mut rng);
                    s += log_ratio(p, q, &x, VarianceSharing::Unequal)?.min(0.0).exp();
                }
            }
            (s / per_history as f64, Some(per_history))
        }
    };
    let alpha_bar_hat = (sum / n as f64).clamp(0.0, 1.0);
    check_unit("alpha_bar_hat", alpha_bar_hat)?;
    Ok(AcceptanceEstimate { alpha_bar_hat, n_histories: n, mc_per_history: per_history })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(gap: f64) -> (GaussianHead, GaussianHead) {
        (GaussianHead::isotropic(vec![gap], 1.0).unwrap(), GaussianHead::isotropic(vec![0.0], 1.0).unwrap())
    }

    #[test]
    fn identical_pairs_give_one() {
        let pairs = vec![pair(0.0); 10];
        let est = estimate_alpha(&pairs, EstimateMode::ClosedForm).unwrap();
        assert_eq!(est.alpha_bar_hat, 1.0);
        let r = est.hoeffding_radius(0.05).unwrap();
        assert!((r - ((2.0f64 / 0.05).ln() / 20.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn tail_bound_arithmetic() {
        let est = AcceptanceEstimate { alpha_bar_hat: 0.5, n_histories: 5000, mc_per_history: Some(1) };
        let b = est.tail_bound(0.05);
        assert!((b - 2.0 * (-25.0f64).exp()).abs() < 1e-20);
        assert!((b - 2.8e-11).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_is_close_to_closed_form() {
        let pairs = vec![pair(1.0); 50];
        let mc = estimate_alpha(&pairs, EstimateMode::MonteCarlo { per_history: 400, seed: 3 }).unwrap();
        let cf = estimate_alpha(&pairs, EstimateMode::ClosedForm).unwrap();
        assert!((mc.alpha_bar_hat - cf.alpha_bar_hat).abs() < mc.hoeffding_radius(0.001).unwrap());
        assert_eq!(mc.mc_per_history, Some(400));
    }

    #[test]
    fn errors() {
        assert!(matches!(estimate_alpha(&[], EstimateMode::ClosedForm), Err(AnalysisError::Empty)));
        let est = estimate_alpha(&[pair(1.0)], EstimateMode::ClosedForm).unwrap();
        assert!(est.hoeffding_radius(0.0).is_err());
        let unequal = (GaussianHead::isotropic(vec![0.0], 1.0).unwrap(), GaussianHead::isotropic(vec![0.0], 2.0).unwrap());
        assert!(estimate_alpha(&[unequal], EstimateMode::ClosedForm).is_err());
    }
}
