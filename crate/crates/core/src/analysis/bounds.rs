use serde::{Deserialize, Serialize};

use super::{AnalysisError, Result};
use crate::prob::quadrature::{integrate, GridSpec};
use crate::prob::{closed_form_overlap, log_ratio, overlap::crossings_1d, tv_between_1d, GaussianHead, VarianceSharing};
use crate::rng::{Purpose, RngStreams};

const MC_SAMPLES: usize = 200_000;
const MC_SEED: u64 = 0x5eed;

/// Mean acceptance `integral min{q, lambda p}` of the tolerance-adjusted rule.
///
/// 1-d heads use quadrature; equal-variance heads with `lambda = 1` use the
/// closed form; anything else falls back to a fixed-seed Monte Carlo average.
pub fn mean_acceptance(p: &GaussianHead, q: &GaussianHead, tolerance_lambda: f64) -> Result<f64> {
    super::check_positive("tolerance_lambda", tolerance_lambda)?;
    q.check_dim(p.dim())?;
    let log_lambda = tolerance_lambda.ln();
    if p.dim() == 1 {
        let grid = GridSpec::covering_heads(&[p, q]);
        let a = integrate(
            |x| q.pdf_1d(x).min(tolerance_lambda * p.pdf_1d(x)),
            &grid,
            &crossings_1d(p, q, log_lambda),
            1e-11,
        );
        return Ok(a.clamp(0.0, 1.0));
    }
    if tolerance_lambda == 1.0 && p.shares_variance_with(q) {
        return Ok(closed_form_overlap(p, q)?);
    }
    let mut rng = RngStreams::new(MC_SEED).stream(0, 0, Purpose::Estimator);
    let mut s = 0.0;
    for _ in 0..MC_SAMPLES {
        let x = q.sample(&mut rng);
        s += (log_ratio(p, q, &x, VarianceSharing::Unequal)? + log_lambda).min(0.0).exp();
    }
    Ok(s / MC_SAMPLES as f64)
}

/// Single-step deviation of the practical variant's output law
/// `g = alpha q + (1 - alpha_bar) p` from the target `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationBounds {
    pub alpha_bar: f64,
    /// `TV(g, p) <= alpha_bar`, valid in any dimension.
    pub tv_bound: f64,
    pub tv_numeric_1d: Option<f64>,
    /// `integral alpha q log(alpha q / (alpha_bar p))`, an upper bound on `KL(g || p)`.
    pub kl_bound_1d: Option<f64>,
    /// `sqrt(kl_bound / 2)`.
    pub pinsker_tv: Option<f64>,
}

pub fn deviation_bounds(p: &GaussianHead, q: &GaussianHead, tolerance_lambda: f64) -> Result<DeviationBounds> {
    let alpha_bar = mean_acceptance(p, q, tolerance_lambda)?;
    if p.dim() != 1 {
        return Ok(DeviationBounds { alpha_bar, tv_bound: alpha_bar, tv_numeric_1d: None, kl_bound_1d: None, pinsker_tv: None });
    }
    let lam = tolerance_lambda;
    let accepted = |x: f64| q.pdf_1d(x).min(lam * p.pdf_1d(x));
    let g = |x: f64| accepted(x) + (1.0 - alpha_bar) * p.pdf_1d(x);
    let grid = GridSpec::covering_heads(&[p, q]);
    let tv = tv_between_1d(g, |x| p.pdf_1d(x), &grid)?;

    let kl = if alpha_bar > 0.0 {
        let ln_ab = alpha_bar.ln();
        integrate(
            |x| {
                let a = accepted(x);
                if a <= 0.0 {
                    return 0.0;
                }
                // ln(alpha q) - ln(alpha_bar) - ln p, kept in log space for the tails
                let ln_a = q.log_density_unchecked(&[x]).min(lam.ln() + p.log_density_unchecked(&[x]));
                a * (ln_a - ln_ab - p.log_density_unchecked(&[x]))
            },
            &grid,
            &crossings_1d(p, q, lam.ln()),
            1e-10,
        )
        .max(0.0)
    } else {
        0.0
    };
    let pinsker = (kl / 2.0).sqrt();
    if tv > alpha_bar + 1e-6 {
        return Err(AnalysisError::BoundViolation(format!("TV {tv} exceeds alpha_bar {alpha_bar}")));
    }
    if tv > pinsker + 1e-6 {
        return Err(AnalysisError::BoundViolation(format!("TV {tv} exceeds Pinsker bound {pinsker}")));
    }
    Ok(DeviationBounds {
        alpha_bar,
        tv_bound: alpha_bar,
        tv_numeric_1d: Some(tv),
        kl_bound_1d: Some(kl),
        pinsker_tv: Some(pinsker),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::normal_cdf;

    fn h(mu: f64, var: f64) -> GaussianHead {
        GaussianHead::isotropic(vec![mu], var).unwrap()
    }

    #[test]
    fn identical_heads_have_no_deviation() {
        let b = deviation_bounds(&h(0.2, 0.5), &h(0.2, 0.5), 1.0).unwrap();
        assert!((b.alpha_bar - 1.0).abs() < 1e-9);
        assert!(b.tv_numeric_1d.unwrap() < 1e-6);
        assert!(b.kl_bound_1d.unwrap() < 1e-8);
    }

    #[test]
    fn unit_gap() {
        let b = deviation_bounds(&h(1.0, 1.0), &h(0.0, 1.0), 1.0).unwrap();
        assert!((b.alpha_bar - 2.0 * normal_cdf(-0.5)).abs() < 1e-8);
        let tv = b.tv_numeric_1d.unwrap();
        assert!(tv <= b.alpha_bar);
        assert!(tv <= b.pinsker_tv.unwrap() + 1e-6);
        // quadrature oracle computed independently with numpy on a 4e6-point grid
        assert!((tv - 0.149_918_6).abs() < 1e-5);
    }

    #[test]
    fn far_apart_heads() {
        let b = deviation_bounds(&h(10.0, 1.0), &h(0.0, 1.0), 1.0).unwrap();
        assert!(b.alpha_bar <= 1e-6);
        assert!(b.tv_numeric_1d.unwrap() <= 1e-6);
    }

    #[test]
    fn tolerance_raises_mean_acceptance() {
        let p = h(1.0, 1.0);
        let q = h(0.0, 1.0);
        let a1 = mean_acceptance(&p, &q, 1.0).unwrap();
        let a2 = mean_acceptance(&p, &q, 2.0).unwrap();
        assert!(a2 > a1);
        let b = deviation_bounds(&p, &q, 2.0).unwrap();
        assert!(b.tv_numeric_1d.unwrap() <= b.alpha_bar);
    }

    #[test]
    fn higher_dimensions_report_only_the_tv_bound() {
        let p = GaussianHead::isotropic(vec![0.5, 0.0], 1.0).unwrap();
        let q = GaussianHead::isotropic(vec![0.0, 0.0], 1.0).unwrap();
        let b = deviation_bounds(&p, &q, 1.0).unwrap();
        assert!((b.alpha_bar - 2.0 * normal_cdf(-0.25)).abs() < 1e-12);
        assert!(b.tv_numeric_1d.is_none() && b.kl_bound_1d.is_none());
    }
}
