//! Composite trapezoid integration with Richardson refinement on a finite grid.

use serde::{Deserialize, Serialize};

use super::{GaussianHead, ProbError, Result};

/// Half-width of the default grid, in units of the largest standard deviation.
pub const COVER_SIGMAS: f64 = 8.0;
/// Initial point count of the default grid.
pub const DEFAULT_POINTS: usize = 1 << 14;
const MAX_LEVELS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl GridSpec {
    /// `[min mean - 8 max sd, max mean + 8 max sd]` with the default point count.
    pub fn covering(components: &[(f64, f64)]) -> Self {
        let max_sd = components.iter().map(|c| c.1).fold(0.0, f64::max);
        let lo = components.iter().map(|c| c.0).fold(f64::INFINITY, f64::min) - COVER_SIGMAS * max_sd;
        let hi = components.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max) + COVER_SIGMAS * max_sd;
        Self { lo, hi, points: DEFAULT_POINTS }
    }

    pub fn covering_heads(heads: &[&GaussianHead]) -> Self {
        let comps: Vec<(f64, f64)> = heads.iter().map(|h| (h.mean()[0], h.max_std())).collect();
        Self::covering(&comps)
    }
}

fn romberg_piece<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n0: usize, tol: f64) -> f64 {
    let mut n = n0.max(2);
    let mut h = (b - a) / n as f64;
    let mut t = 0.5 * (f(a) + f(b));
    for i in 1..n {
        t += f(a + i as f64 * h);
    }
    t *= h;
    let mut prev: Option<f64> = None;
    for _ in 0..MAX_LEVELS {
        let mut mid = 0.0;
        for i in 0..n {
            mid += f(a + (i as f64 + 0.5) * h);
        }
        let t2 = 0.5 * t + 0.5 * h * mid;
        let r = (4.0 * t2 - t) / 3.0;
        if let Some(p) = prev {
            if (r - p).abs() <= tol {
                return r;
            }
        }
        prev = Some(r);
        t = t2;
        n *= 2;
        h *= 0.5;
    }
    prev.unwrap_or(t)
}

/// Integrates `f` over the grid span, splitting at `breakpoints` (kinks of
/// `f`) so every piece is smooth. Pieces share `points` in proportion to their
/// length and are refined until successive Richardson estimates agree to `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, grid: &GridSpec, breakpoints: &[f64], tol: f64) -> f64 {
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|b| b.is_finite() && *b > grid.lo && *b < grid.hi)
        .collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(grid.lo);
    edges.extend(cuts);
    edges.push(grid.hi);
    let span = grid.hi - grid.lo;
    let pieces = edges.len() - 1;
    edges
        .windows(2)
        .map(|w| {
            let share = ((w[1] - w[0]) / span * grid.points as f64).ceil() as usize;
            romberg_piece(&f, w[0], w[1], share.max(16), tol / pieces as f64)
        })
        .sum()
}

/// `0.5 * integral |a - b|` over the grid, after checking both densities put
/// at least 0.999 of their mass on it.
pub fn tv_between_1d<A, B>(density_a: A, density_b: B, grid: &GridSpec) -> Result<f64>
where
    A: Fn(f64) -> f64,
    B: Fn(f64) -> f64,
{
    let mass_a = integrate(&density_a, grid, &[], 1e-9);
    let mass_b = integrate(&density_b, grid, &[], 1e-9);
    if mass_a < 0.999 || mass_b < 0.999 {
        return Err(ProbError::GridCoverage { mass_a, mass_b });
    }
    Ok(0.5 * integrate(|x| (density_a(x) - density_b(x)).abs(), grid, &[], 1e-6))
}
