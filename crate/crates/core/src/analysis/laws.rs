use serde::{Deserialize, Serialize};

use super::{check_positive, check_unit, AnalysisError, Result};

/// `Pr(L = l)` for `l = 1..=gamma+1` under i.i.d. acceptance with rate `alpha_bar`:
/// `(1 - a) a^(l-1)` below the cap and `a^gamma` at `gamma + 1`.
pub fn block_length_pmf(alpha_bar: f64, gamma: usize) -> Result<Vec<f64>> {
    check_unit("alpha_bar", alpha_bar)?;
    if gamma == 0 {
        return Err(AnalysisError::Domain("gamma must be >= 1".into()));
    }
    let mut pmf: Vec<f64> = (1..=gamma).map(|l| (1.0 - alpha_bar) * alpha_bar.powi(l as i32 - 1)).collect();
    pmf.push(alpha_bar.powi(gamma as i32));
    Ok(pmf)
}

/// `E[L] = (1 - a^(gamma+1)) / (1 - a)`, evaluated as the finite geometric sum
/// so that `a = 1` gives `gamma + 1` without cancellation.
pub fn expected_block_length(alpha_bar: f64, gamma: usize) -> Result<f64> {
    check_unit("alpha_bar", alpha_bar)?;
    let mut term = 1.0;
    let mut sum = 1.0;
    for _ in 0..gamma {
        term *= alpha_bar;
        sum += term;
    }
    Ok(sum)
}

/// `E[L] / (c gamma + 1)`.
pub fn speedup_wall(alpha_bar: f64, gamma: usize, c: f64) -> Result<f64> {
    check_positive("c", c)?;
    Ok(expected_block_length(alpha_bar, gamma)? / (c * gamma as f64 + 1.0))
}

/// Target-forward equivalents per emitted patch: `(gamma c_hat + gamma + 1) / E[L]`.
pub fn ops_factor(alpha_bar: f64, gamma: usize, c_hat: f64) -> Result<f64> {
    check_positive("c_hat", c_hat)?;
    let g = gamma as f64;
    Ok((g * c_hat + g + 1.0) / expected_block_length(alpha_bar, gamma)?)
}

/// Whether `S_wall(gamma + 1) >= S_wall(gamma)`.
///
/// Clearing denominators in `S(gamma+1) - S(gamma)` leaves
/// `a^(gamma+1) (1 + c gamma) >= c E[L](gamma)`.
pub fn speedup_increases(alpha_bar: f64, gamma: usize, c: f64) -> Result<bool> {
    let lhs = alpha_bar.powi(gamma as i32 + 1) * (1.0 + c * gamma as f64);
    Ok(lhs >= c * expected_block_length(alpha_bar, gamma)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GammaChoice {
    /// Largest `gamma <= gamma_max` at which the speedup still increases.
    pub gamma_rule: usize,
    /// Exhaustive argmax of `speedup_wall` over `1..=gamma_max`, smallest on ties.
    pub gamma_scan: usize,
}

pub fn select_gamma(alpha_bar: f64, c: f64, gamma_max: usize) -> Result<GammaChoice> {
    check_unit("alpha_bar", alpha_bar)?;
    check_positive("c", c)?;
    if gamma_max == 0 {
        return Err(AnalysisError::Domain("gamma_max must be >= 1".into()));
    }
    let mut gamma_rule = 1;
    for g in 1..=gamma_max {
        if speedup_increases(alpha_bar, g, c)? {
            gamma_rule = g;
        }
    }
    let mut gamma_scan = 1;
    let mut best = speedup_wall(alpha_bar, 1, c)?;
    for g in 2..=gamma_max {
        let s = speedup_wall(alpha_bar, g, c)?;
        if s > best {
            best = s;
            gamma_scan = g;
        }
    }
    Ok(GammaChoice { gamma_rule, gamma_scan })
}

/// Heuristic: residual sampling pays off only when `1 - alpha_bar >= 1 / gamma`.
pub fn lossless_worthwhile(alpha_bar: f64, gamma: usize) -> Result<bool> {
    check_unit("alpha_bar", alpha_bar)?;
    if gamma == 0 {
        return Err(AnalysisError::Domain("gamma must be >= 1".into()));
    }
    Ok(1.0 - alpha_bar >= 1.0 / gamma as f64)
}

/// `E[L]` at both ends of the conditional acceptance range. Any acceptance
/// process whose conditional rates stay in `[alpha_lower, alpha_upper]` has
/// its mean block length inside this interval.
pub fn dependence_interval(alpha_lower: f64, alpha_upper: f64, gamma: usize) -> Result<(f64, f64)> {
    check_unit("alpha_lower", alpha_lower)?;
    check_unit("alpha_upper", alpha_upper)?;
    if alpha_lower > alpha_upper {
        return Err(AnalysisError::Domain(format!("alpha_lower {alpha_lower} exceeds alpha_upper {alpha_upper}")));
    }
    Ok((expected_block_length(alpha_lower, gamma)?, expected_block_length(alpha_upper, gamma)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonTv {
    /// `1 - prod(1 - delta_t)`.
    pub product: f64,
    /// `sum delta_t`, the looser union bound.
    pub sum: f64,
}

/// Joint total-variation bound over a horizon from per-step deviations.
pub fn horizon_tv_bound(per_step_deltas: &[f64]) -> Result<HorizonTv> {
    let mut keep = 1.0;
    let mut sum = 0.0;
    for d in per_step_deltas {
        check_unit("delta", *d)?;
        keep *= 1.0 - d;
        sum += d;
    }
    Ok(HorizonTv { product: 1.0 - keep, sum })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pmf_limits_and_substitution() {
        assert_eq!(block_length_pmf(1.0, 3).unwrap(), vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(block_length_pmf(0.0, 3).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(block_length_pmf(0.5, 2).unwrap(), vec![0.5, 0.25, 0.25]);
        assert!(block_length_pmf(1.2, 2).is_err());
        assert!(block_length_pmf(0.5, 0).is_err());
    }

    #[test]
    fn expected_block_length_reference_values() {
        assert_eq!(expected_block_length(0.0, 7).unwrap(), 1.0);
        assert_eq!(expected_block_length(1.0, 3).unwrap(), 4.0);
        let closed = |a: f64, g: i32| (1.0 - a.powi(g + 1)) / (1.0 - a);
        for a in [0.1, 0.5, 0.9133, 0.9625, 0.999] {
            assert!((expected_block_length(a, 3).unwrap() - closed(a, 3)).abs() < 1e-12);
        }
    }

    #[test]
    fn speedup_and_ops_reference_values() {
        // (1 + 0.973 + 0.973^2 + 0.973^3) / 1.855
        let s = speedup_wall(0.973, 3, 0.285).unwrap();
        assert!((s - 2.070_564).abs() < 1e-5);
        assert!((speedup_wall(1.0, 3, 0.244).unwrap() - 4.0 / 1.732).abs() < 1e-12);
        assert!(speedup_wall(0.9, 3, 1e12).unwrap() < 1e-10);
        assert!(speedup_wall(0.9, 3, 0.0).is_err());
        assert!((ops_factor(1.0, 3, 0.25).unwrap() - 1.1875).abs() < 1e-12);
        assert!((ops_factor(0.5, 3, 0.25).unwrap() - 4.75 / 1.875).abs() < 1e-12);
        assert!((ops_factor(1.0 - 1e-12, 1, 1e-12).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gamma_selection() {
        let perfect = select_gamma(1.0, 0.2, 16).unwrap();
        assert_eq!(perfect, GammaChoice { gamma_rule: 16, gamma_scan: 16 });
        let poor = select_gamma(0.3, 0.9, 64).unwrap();
        assert_eq!(poor.gamma_scan, 1);
        let mid = select_gamma(0.9, 0.2, 64).unwrap();
        assert!(mid.gamma_rule.abs_diff(mid.gamma_scan) <= 1);
        assert!(select_gamma(0.5, 0.2, 0).is_err());
    }

    #[test]
    fn lossless_heuristic() {
        assert!(!lossless_worthwhile(0.95, 10).unwrap());
        assert!(lossless_worthwhile(0.5, 4).unwrap());
        assert!((1..50).all(|g| !lossless_worthwhile(1.0, g).unwrap()));
    }

    #[test]
    fn dependence_and_horizon() {
        assert_eq!(dependence_interval(0.0, 1.0, 3).unwrap(), (1.0, 4.0));
        let (lo, hi) = dependence_interval(0.7, 0.7, 5).unwrap();
        assert_eq!(lo, hi);
        assert!(dependence_interval(0.9, 0.8, 3).is_err());
        assert_eq!(horizon_tv_bound(&[0.0, 0.0]).unwrap().product, 0.0);
        let h = horizon_tv_bound(&[0.1, 0.1]).unwrap();
        assert!((h.product - 0.19).abs() < 1e-15 && (h.sum - 0.2).abs() < 1e-15);
        assert!(horizon_tv_bound(&[1.5]).is_err());
    }

    proptest! {
        #[test]
        fn pmf_normalized_and_consistent(a in 0.0f64..=1.0, gamma in 1usize..40) {
            let pmf = block_length_pmf(a, gamma).unwrap();
            prop_assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let mean: f64 = pmf.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum();
            prop_assert!((mean - expected_block_length(a, gamma).unwrap()).abs() < 1e-10);
        }

        #[test]
        fn speedup_identity(a in 0.0f64..=1.0, gamma in 1usize..40, c in 0.001f64..5.0) {
            let s = speedup_wall(a, gamma, c).unwrap();
            let el = expected_block_length(a, gamma).unwrap();
            prop_assert!((s * (c * gamma as f64 + 1.0) - el).abs() < 1e-12 * el);
        }

        #[test]
        fn product_form_is_tighter(deltas in prop::collection::vec(0.0f64..=1.0, 0..30)) {
            let h = horizon_tv_bound(&deltas).unwrap();
            prop_assert!(h.product <= h.sum + 1e-15);
        }
    }
}
