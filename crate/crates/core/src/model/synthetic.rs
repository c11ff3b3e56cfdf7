//! Synthetic benchmark series with known structure.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::RawSeries;

fn seasonal_value(t: usize, period: usize, channel: usize) -> f64 {
    let phase = (t % period) as f64 / period as f64 * std::f64::consts::TAU;
    let shift = channel as f64 * 0.7;
    (phase + shift).sin() + 0.5 * (2.0 * phase + 0.3 * shift).cos()
}

fn timestamps(len: usize) -> Vec<String> {
    (0..len).map(|t| format!("{t:08}")).collect()
}

/// A noiseless series that repeats exactly every `period` steps.
pub fn exact_seasonal(len: usize, channels: usize, period: usize, offset: usize) -> RawSeries {
    let values = (0..channels)
        .map(|c| (0..len).map(|t| 3.0 * seasonal_value(t + offset, period, c) + c as f64).collect())
        .collect();
    RawSeries {
        channel_names: (0..channels).map(|c| format!("ch{c}")).collect(),
        timestamps: Some(timestamps(len)),
        values,
    }
}

/// Multiplicative seasonal autoregression `(1 - phi B)(1 - Phi B^s) a_t = e_t`,
/// optionally on top of a deterministic seasonal profile.
///
/// With `amplitude = 0` the best predictor depends only on the last
/// `period + 1` values, so any lookback at least that long can learn it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeasonalArConfig {
    pub len: usize,
    pub channels: usize,
    /// Seasonal lag `s`.
    pub period: usize,
    /// Lag-1 coefficient.
    pub phi: f64,
    /// Seasonal coefficient at lag `period`.
    pub seasonal_phi: f64,
    /// Scale of the deterministic seasonal profile.
    pub amplitude: f64,
    /// Innovation standard deviation.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SeasonalArConfig {
    fn default() -> Self {
        Self { len: 4096, channels: 3, period: 24, phi: 0.5, seasonal_phi: 0.9, amplitude: 0.0, noise_std: 1.0, seed: 7 }
    }
}

/// Generates `cfg.channels` independent channels after a burn-in of ten seasons.
pub fn seasonal_ar(cfg: &SeasonalArConfig) -> RawSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let s = cfg.period.max(1);
    let burn = 10 * (s + 1);
    let (phi, big) = (cfg.phi, cfg.seasonal_phi);
    let values = (0..cfg.channels)
        .map(|c| {
            let mut a = vec![0.0f64; burn + cfg.len];
            for t in 0..a.len() {
                let z: f64 = StandardNormal.sample(&mut rng);
                let lag = |k: usize| if t >= k { a[t - k] } else { 0.0 };
                a[t] = phi * lag(1) + big * lag(s) - phi * big * lag(s + 1) + cfg.noise_std * z;
            }
            a.drain(..burn);
            if cfg.amplitude != 0.0 {
                for (t, v) in a.iter_mut().enumerate() {
                    *v += cfg.amplitude * seasonal_value(t, s, c);
                }
            }
            a
        })
        .collect();
    RawSeries {
        channel_names: (0..cfg.channels).map(|c| format!("ch{c}")).collect(),
        timestamps: Some(timestamps(cfg.len)),
        values,
    }
}

/// Plain AR(1) channels, `x_t = phi x_{t-1} + e_t`.
pub fn ar1(len: usize, channels: usize, phi: f64, seed: u64) -> RawSeries {
    seasonal_ar(&SeasonalArConfig { len, channels, period: 1, phi, seasonal_phi: 0.0, amplitude: 0.0, noise_std: 1.0, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_seasonal_repeats() {
        let s = exact_seasonal(100, 2, 12, 0);
        for c in 0..2 {
            for t in 12..100 {
                assert_eq!(s.values[c][t], s.values[c][t - 12]);
            }
        }
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let cfg = SeasonalArConfig { len: 50, ..Default::default() };
        assert_eq!(seasonal_ar(&cfg), seasonal_ar(&cfg));
        let other = SeasonalArConfig { seed: 8, ..cfg.clone() };
        assert_ne!(seasonal_ar(&cfg), seasonal_ar(&other));
    }

    #[test]
    fn seasonal_recursion_holds() {
        let cfg = SeasonalArConfig { len: 200, channels: 1, noise_std: 0.0, ..Default::default() };
        // without noise the burn-in decays from zero and stays at zero
        assert!(seasonal_ar(&cfg).values[0].iter().all(|v| *v == 0.0));
        let s = seasonal_ar(&SeasonalArConfig { len: 20_000, channels: 1, ..Default::default() });
        let x = &s.values[0];
        // sample autocorrelation at the seasonal lag is close to the seasonal coefficient
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let c0: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
        let c24: f64 = x.windows(25).map(|w| (w[0] - m) * (w[24] - m)).sum();
        assert!((c24 / c0 - 0.9).abs() < 0.05, "{}", c24 / c0);
    }
}
