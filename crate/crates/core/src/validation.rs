//! Statistical self-checks of the sampling machinery.
//!
//! Each suite simulates a property with a known answer (exactness of the
//! lossless variant, the practical variant's output law, the capped-geometric
//! block length, overlap formulas, residual cost, the gamma rule, dependence
//! bounds and estimator coverage) and reports one [`Check`] per threshold.
//! Suites take a seed; the sample sizes are chosen so that pass/fail does not
//! depend on it.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::analysis::{
    block_length_pmf, deviation_bounds, estimate_alpha, expected_block_length, mean_acceptance, select_gamma,
    dependence_interval, AnalysisError, EstimateMode,
};
use crate::engine::{decode, DecodeConfig, EngineError, Variant};
use crate::model::{ForecastModel, History, ModelError};
use crate::prob::quadrature::{integrate, GridSpec};
use crate::prob::{closed_form_overlap, normal_cdf, overlap, residual_sample, GaussianHead, OverlapMethod, ProbError, VarianceSharing};
use crate::rng::{Purpose, RngStreams};
use crate::stats::{chi_square_gof, ks_one_sample, ks_two_sample, mean_and_se};

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("unknown suite {0:?}")]
    UnknownSuite(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

pub type Result<T> = std::result::Result<T, ValidationError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Lossless,
    PracticalLaw,
    BlockLength,
    Bounds,
    Overlap,
    ResidualCost,
    GammaRule,
    Dependence,
    Estimator,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Lossless,
        Suite::PracticalLaw,
        Suite::BlockLength,
        Suite::Bounds,
        Suite::Overlap,
        Suite::ResidualCost,
        Suite::GammaRule,
        Suite::Dependence,
        Suite::Estimator,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Lossless => "lossless",
            Suite::PracticalLaw => "practical_law",
            Suite::BlockLength => "block_length",
            Suite::Bounds => "bounds",
            Suite::Overlap => "overlap",
            Suite::ResidualCost => "residual_cost",
            Suite::GammaRule => "gamma_rule",
            Suite::Dependence => "dependence",
            Suite::Estimator => "estimator",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = ValidationError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|v| v.as_str() == s.replace('-', "_"))
            .ok_or_else(|| ValidationError::UnknownSuite(s.to_string()))
    }
}

/// One thresholded quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `"<="` or `">="`.
    pub relation: String,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, relation: "<=".into(), threshold, passed: value <= threshold }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, relation: ">=".into(), threshold, passed: value >= threshold }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub suites: Vec<SuiteReport>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteReport::passed)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.suites {
            out += &format!("{} {} ({:.1}s)\n", if s.passed() { "PASS" } else { "FAIL" }, s.suite, s.seconds);
            for c in &s.checks {
                out += &format!(
                    "  [{}] {}: {:.6} {} {}\n",
                    if c.passed { "ok" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.relation,
                    c.threshold
                );
            }
        }
        out
    }
}

pub fn run_suites(suites: &[Suite], seed: u64) -> Result<ValidationReport> {
    let suites = suites.iter().map(|s| run_suite(*s, seed)).collect::<Result<Vec<_>>>()?;
    Ok(ValidationReport { seed, suites })
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport> {
    let started = Instant::now();
    let checks = match suite {
        Suite::Lossless => lossless(seed)?,
        Suite::PracticalLaw => practical_law(seed)?,
        Suite::BlockLength => block_length(seed)?,
        Suite::Bounds => bounds()?,
        Suite::Overlap => overlap_agreement(seed)?,
        Suite::ResidualCost => residual_cost(seed)?,
        Suite::GammaRule => gamma_rule()?,
        Suite::Dependence => dependence(seed)?,
        Suite::Estimator => estimator(seed)?,
    };
    Ok(SuiteReport { suite, seed, checks, seconds: started.elapsed().as_secs_f64() })
}

const LOSSLESS_SAMPLES: usize = 100_000;
const PRACTICAL_SAMPLES: usize = 100_000;
const BLOCK_ROUNDS: usize = 100_000;
const RESIDUAL_SAMPLES: usize = 10_000;
const OVERLAP_PAIRS: usize = 50;
const OVERLAP_MC_PAIRS: usize = 5;
const OVERLAP_MC_DRAWS: usize = 1_000_000;
const DEPENDENCE_CHAINS: usize = 100;
const DEPENDENCE_ROUNDS: usize = 100_000;
const COVERAGE_REPLICATIONS: usize = 200;
const COVERAGE_HISTORIES: usize = 256;
const COVERAGE_DELTA: f64 = 0.05;

fn stream(seed: u64, suite: u64, index: u64) -> rand_chacha::ChaCha8Rng {
    RngStreams::new(seed).stream(suite, index, Purpose::Validation)
}

fn oracle(mean: f64, sigma: f64) -> Result<ForecastModel> {
    Ok(ForecastModel::synthetic_oracle(vec![mean], sigma)?)
}

fn head(mean: f64, sigma: f64) -> Result<GaussianHead> {
    Ok(GaussianHead::isotropic(vec![mean], sigma * sigma)?)
}

/// First emitted value of `n` independent one-patch decodes.
fn single_step_outputs(target: &ForecastModel, draft: &ForecastModel, variant: Variant, n: usize, seed: u64) -> Result<Vec<f64>> {
    let h0 = History::new(1, vec![0.0])?;
    let cfg = DecodeConfig {
        gamma: 1,
        variant,
        horizon_patches: 1,
        seed,
        variance_sharing: VarianceSharing::Unequal,
        ..Default::default()
    };
    (0..n as u64)
        .map(|lane| {
            let (out, _) = decode(target, draft, &h0, &cfg.for_lane(lane))?;
            Ok(out[0][0])
        })
        .collect()
}

fn lossless(seed: u64) -> Result<Vec<Check>> {
    let (mp, sp, mq, sq) = (0.0, 1.0, 0.8, 1.3);
    let target = oracle(mp, sp)?;
    let draft = oracle(mq, sq)?;
    let spec = single_step_outputs(&target, &draft, Variant::Lossless, LOSSLESS_SAMPLES, seed)?;
    let p = head(mp, sp)?;
    let mut rng = stream(seed, 1, 0);
    let direct: Vec<f64> = (0..LOSSLESS_SAMPLES).map(|_| p.sample(&mut rng)[0]).collect();
    let two = ks_two_sample(&spec, &direct);
    let one = ks_one_sample(&spec, |x| normal_cdf((x - mp) / sp));
    Ok(vec![
        Check::at_least("two-sample KS p-value vs direct target draws", two.p_value, 0.01),
        Check::at_most("sup |F_emp - F_target|", one.statistic, 0.01),
    ])
}

fn practical_law(seed: u64) -> Result<Vec<Check>> {
    let (mp, sp, mq, sq) = (0.0, 1.0, 0.9, 1.2);
    let target = oracle(mp, sp)?;
    let draft = oracle(mq, sq)?;
    let xs = single_step_outputs(&target, &draft, Variant::Practical, PRACTICAL_SAMPLES, seed)?;
    let p = head(mp, sp)?;
    let q = head(mq, sq)?;
    let alpha_bar = mean_acceptance(&p, &q, 1.0)?;
    let g = |x: f64| q.pdf_1d(x).min(p.pdf_1d(x)) + (1.0 - alpha_bar) * p.pdf_1d(x);

    // 40 equal bins on [-5, 5] plus the two tails
    let (lo, hi, bins) = (-5.0, 5.0, 40usize);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins + 2];
    for x in &xs {
        let i = if *x < lo { 0 } else if *x >= hi { bins + 1 } else { 1 + ((x - lo) / width) as usize };
        counts[i.min(bins)] += 1;
    }
    let grid = GridSpec::covering_heads(&[&p, &q]);
    let mass = |a: f64, b: f64| {
        integrate(g, &GridSpec { lo: a, hi: b, points: 256 }, &crate::prob::overlap::crossings_1d(&p, &q, 0.0), 1e-12)
    };
    let mut expected = vec![mass(grid.lo, lo)];
    expected.extend((0..bins).map(|i| mass(lo + i as f64 * width, lo + (i + 1) as f64 * width)));
    expected.push(mass(hi, grid.hi));
    let n = xs.len() as f64;
    let tv: f64 = 0.5 * counts.iter().zip(&expected).map(|(c, e)| (*c as f64 / n - e).abs()).sum::<f64>();

    let worst = bounds_grid()?.into_iter().map(|(tv, a, _)| tv - a).fold(f64::NEG_INFINITY, f64::max);
    Ok(vec![
        Check::at_most("histogram TV to g = alpha q + (1 - alpha_bar) p", tv, 0.02),
        Check::at_most("max over 50-point grid of TV(g, p) - alpha_bar", worst, 0.0),
    ])
}

/// `(tv, alpha_bar, pinsker)` over a 50-point parameter grid: five mean gaps,
/// five draft/target scale ratios and two tolerances.
fn bounds_grid() -> Result<Vec<(f64, f64, f64)>> {
    let mut out = Vec::with_capacity(50);
    for gap in [0.1, 0.5, 1.0, 2.0, 4.0] {
        for ratio in [0.5, 0.8, 1.0, 1.25, 2.0] {
            for lambda in [1.0, 1.5] {
                let b = deviation_bounds(&head(gap, 1.0)?, &head(0.0, ratio)?, lambda)?;
                out.push((b.tv_numeric_1d.unwrap_or(0.0), b.alpha_bar, b.pinsker_tv.unwrap_or(f64::INFINITY)));
            }
        }
    }
    Ok(out)
}

fn bounds() -> Result<Vec<Check>> {
    let grid = bounds_grid()?;
    let over_alpha = grid.iter().map(|(tv, a, _)| tv - a).fold(f64::NEG_INFINITY, f64::max);
    let over_pinsker = grid.iter().map(|(tv, _, pk)| tv - pk).fold(f64::NEG_INFINITY, f64::max);
    Ok(vec![
        Check::at_most("max TV(g, p) - alpha_bar", over_alpha, 0.0),
        Check::at_most("max TV(g, p) - Pinsker bound", over_pinsker, 1e-6),
    ])
}

fn block_length(seed: u64) -> Result<Vec<Check>> {
    let target = oracle(0.0, 1.0)?;
    let draft = oracle(0.6, 1.0)?;
    let alpha = closed_form_overlap(&head(0.0, 1.0)?, &head(0.6, 1.0)?)?;
    let h0 = History::new(1, vec![0.0])?;
    let mut checks = Vec::new();
    for gamma in [2usize, 3, 5] {
        let cfg = DecodeConfig {
            gamma,
            variant: Variant::Practical,
            horizon_patches: BLOCK_ROUNDS * (gamma + 1),
            seed: seed ^ gamma as u64,
            ..Default::default()
        };
        let (_, trace) = decode(&target, &draft, &h0, &cfg)?;
        let ls: Vec<usize> = trace.rounds.iter().take(BLOCK_ROUNDS).map(|r| r.outputs_emitted).collect();
        let mut counts = vec![0u64; gamma + 1];
        for l in &ls {
            counts[l - 1] += 1;
        }
        let pmf = block_length_pmf(alpha, gamma)?;
        let chi = chi_square_gof(&counts, &pmf);
        let (mean, se) = mean_and_se(&ls.iter().map(|l| *l as f64).collect::<Vec<_>>());
        let z = (mean - expected_block_length(alpha, gamma)?).abs() / se;
        checks.push(Check::at_least(format!("gamma={gamma}: chi-square p-value"), chi.p_value, 0.01));
        checks.push(Check::at_most(format!("gamma={gamma}: |mean L - E[L]| / SE"), z, 3.0));
    }
    Ok(checks)
}

fn overlap_agreement(seed: u64) -> Result<Vec<Check>> {
    let mut rng = stream(seed, 5, 0);
    let mut worst_quad = 0.0f64;
    let mut worst_z = 0.0f64;
    for i in 0..OVERLAP_PAIRS {
        let sigma = rng.random_range(0.3..2.0);
        let p = head(rng.random_range(-2.0..2.0), sigma)?;
        let q = head(rng.random_range(-2.0..2.0), sigma)?;
        let closed = closed_form_overlap(&p, &q)?;
        let quad = overlap(&p, &q, OverlapMethod::NumericQuadrature1d)?.beta;
        worst_quad = worst_quad.max((closed - quad).abs());
        if i < OVERLAP_MC_PAIRS {
            let mc = overlap(&p, &q, OverlapMethod::MonteCarlo { samples: OVERLAP_MC_DRAWS, seed: seed.wrapping_add(i as u64) })?;
            let se = mc.std_error.unwrap_or(0.0).max(f64::MIN_POSITIVE);
            worst_z = worst_z.max((mc.beta - closed).abs() / se);
        }
    }
    Ok(vec![
        Check::at_most("max |closed form - quadrature| over 50 pairs", worst_quad, 1e-6),
        Check::at_most("max |Monte Carlo - closed form| / SE", worst_z, 3.0),
    ])
}

fn residual_cost(seed: u64) -> Result<Vec<Check>> {
    let std_normal = Normal::standard();
    let mut checks = Vec::new();
    for (k, beta) in [0.3f64, 0.6, 0.9].into_iter().enumerate() {
        let gap = -2.0 * std_normal.inverse_cdf(beta / 2.0);
        let p = head(gap, 1.0)?;
        let q = head(0.0, 1.0)?;
        let mut rng = stream(seed, 6, k as u64);
        let mut total = 0usize;
        for _ in 0..RESIDUAL_SAMPLES {
            total += residual_sample(&p, &q, &mut rng)?.target_draws;
        }
        let mean = total as f64 / RESIDUAL_SAMPLES as f64;
        let expected = 1.0 / (1.0 - beta);
        checks.push(Check::at_most(format!("beta={beta}: |mean draws - 1/(1-beta)| / (1/(1-beta))"), (mean - expected).abs() / expected, 0.05));
    }
    Ok(checks)
}

fn gamma_rule() -> Result<Vec<Check>> {
    let mut worst = 0usize;
    for i in 0..25 {
        let alpha = 0.5 + 0.49 * i as f64 / 24.0;
        for j in 0..20 {
            let c = 0.01 + 0.59 * j as f64 / 19.0;
            let g = select_gamma(alpha, c, 64)?;
            worst = worst.max(g.gamma_rule.abs_diff(g.gamma_scan));
        }
    }
    Ok(vec![Check::at_most("max |gamma_rule - gamma_scan| over 500 (alpha, c) points", worst as f64, 1.0)])
}

/// Mean block length of a two-state hidden Markov acceptance process whose
/// per-state acceptance rates are `rates`; the state moves on every proposal.
fn markov_mean_l<R: Rng>(rng: &mut R, rates: [f64; 2], stay: [f64; 2], gamma: usize, rounds: usize) -> f64 {
    let mut state = 0usize;
    let mut total = 0usize;
    for _ in 0..rounds {
        let mut n = 0;
        while n < gamma {
            let accepted = rng.random::<f64>() < rates[state];
            if rng.random::<f64>() >= stay[state] {
                state = 1 - state;
            }
            if !accepted {
                break;
            }
            n += 1;
        }
        total += n + 1;
    }
    total as f64 / rounds as f64
}

fn dependence(seed: u64) -> Result<Vec<Check>> {
    let mut rng = stream(seed, 8, 0);
    let mut inside = 0usize;
    for _ in 0..DEPENDENCE_CHAINS {
        let lower: f64 = rng.random_range(0.3..0.9);
        let upper = (lower + rng.random_range(0.05..0.3)).min(0.999);
        let width = upper - lower;
        let rates = [lower + rng.random_range(0.0..1.0) * width, lower + rng.random_range(0.0..1.0) * width];
        let stay = [rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)];
        let gamma = rng.random_range(2..=6);
        let (lo, hi) = dependence_interval(lower, upper, gamma)?;
        let mean = markov_mean_l(&mut rng, rates, stay, gamma, DEPENDENCE_ROUNDS);
        if (lo..=hi).contains(&mean) {
            inside += 1;
        }
    }
    Ok(vec![Check::at_least("chains with mean L inside the dependence interval", inside as f64, DEPENDENCE_CHAINS as f64)])
}

fn estimator(seed: u64) -> Result<Vec<Check>> {
    let mut rng = stream(seed, 9, 0);
    // population of 4-d head pairs with a spread of overlaps
    let population: Vec<(GaussianHead, GaussianHead)> = (0..4096)
        .map(|_| {
            let var = rng.random_range(0.2..1.5f64);
            let mp: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mq: Vec<f64> = mp.iter().map(|m| m + rng.random_range(-1.0..1.0) * var.sqrt()).collect();
            Ok((GaussianHead::isotropic(mp, var)?, GaussianHead::isotropic(mq, var)?))
        })
        .collect::<Result<_>>()?;
    let truth = population.iter().map(|(p, q)| closed_form_overlap(p, q)).sum::<std::result::Result<f64, _>>()?
        / population.len() as f64;
    let (mut covered_closed, mut covered_mc) = (0usize, 0usize);
    for rep in 0..COVERAGE_REPLICATIONS {
        let sample: Vec<(GaussianHead, GaussianHead)> =
            (0..COVERAGE_HISTORIES).map(|_| population[rng.random_range(0..population.len())].clone()).collect();
        let closed = estimate_alpha(&sample, EstimateMode::ClosedForm)?;
        if (closed.alpha_bar_hat - truth).abs() <= closed.hoeffding_radius(COVERAGE_DELTA)? {
            covered_closed += 1;
        }
        let mode = EstimateMode::MonteCarlo { per_history: 1, seed: seed.wrapping_mul(1_000_003).wrapping_add(rep as u64) };
        let mc = estimate_alpha(&sample, mode)?;
        if (mc.alpha_bar_hat - truth).abs() <= mc.hoeffding_radius(COVERAGE_DELTA)? {
            covered_mc += 1;
        }
    }
    let n = COVERAGE_REPLICATIONS as f64;
    Ok(vec![
        Check::at_least("closed-form per-history coverage at 95%", covered_closed as f64 / n, 1.0 - COVERAGE_DELTA),
        Check::at_least("Monte Carlo (m = 1) coverage at 95%", covered_mc as f64 / n, 1.0 - COVERAGE_DELTA),
    ])
}
