use rand::Rng;

use super::{closed_form_overlap, GaussianHead, ProbError, Result};

/// Hard cap on thinning iterations for a single residual sample.
pub const MAX_RESIDUAL_DRAWS: usize = 50_000_000;

const IDENTICAL_BETA: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualDraw {
    pub sample: Vec<f64>,
    /// Number of proposals `Z ~ p` consumed; its mean is `1 / (1 - beta)`.
    pub target_draws: usize,
}

/// Draws from `r(x) = (p(x) - q(x))+ / (1 - beta)` by thinning: propose
/// `Z ~ p` and keep it with probability `(1 - q(Z)/p(Z))+`.
pub fn residual_sample<R: Rng + ?Sized>(p: &GaussianHead, q: &GaussianHead, rng: &mut R) -> Result<ResidualDraw> {
    q.check_dim(p.dim())?;
    if p.shares_variance_with(q) {
        let beta = closed_form_overlap(p, q)?;
        if beta >= IDENTICAL_BETA {
            return Err(ProbError::ResidualUndefined { beta });
        }
    } else if p == q {
        return Err(ProbError::ResidualUndefined { beta: 1.0 });
    }
    for draws in 1..=MAX_RESIDUAL_DRAWS {
        let z = p.sample(rng);
        let log_q_over_p = q.log_density_unchecked(&z) - p.log_density_unchecked(&z);
        let keep = if log_q_over_p >= 0.0 { 0.0 } else { 1.0 - log_q_over_p.exp() };
        let u: f64 = rng.random();
        if u < keep {
            return Ok(ResidualDraw { sample: z, target_draws: draws });
        }
    }
    Err(ProbError::ResidualCostExceeded { draws: MAX_RESIDUAL_DRAWS })
}
