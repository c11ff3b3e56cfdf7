use serde::{Deserialize, Serialize};

use super::{ModelError, RawSeries, Result};

/// Per-channel standardization statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn fit(series: &RawSeries) -> Self {
        let (mean, std) = series
            .values
            .iter()
            .map(|c| {
                let n = c.len() as f64;
                let m = c.iter().sum::<f64>() / n;
                let s = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
                // constant channels keep unit scale
                (m, if s > 0.0 { s } else { 1.0 })
            })
            .unzip();
        Self { mean, std }
    }

    pub fn standardize(&self, channel: usize, v: f64) -> f64 {
        (v - self.mean[channel]) / self.std[channel]
    }

    pub fn destandardize(&self, channel: usize, z: f64) -> f64 {
        z * self.std[channel] + self.mean[channel]
    }
}

/// A standardized series cut into non-overlapping patches of `patch_len`
/// timesteps, each channel tokenized on its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchSeries {
    pub values: Vec<Vec<f64>>,
    pub patch_len: usize,
    /// `patches[channel][i]` is the i-th patch of that channel.
    pub patches: Vec<Vec<Vec<f64>>>,
    pub norm_stats: NormStats,
}

impl PatchSeries {
    /// Standardizes with `stats` when given (e.g. train statistics applied to a
    /// test split), otherwise with statistics fitted on `raw`.
    pub fn new(raw: &RawSeries, patch_len: usize, stats: Option<&NormStats>) -> Result<Self> {
        if patch_len == 0 {
            return Err(ModelError::InvalidParameter("patch_len must be >= 1".into()));
        }
        let norm_stats = stats.cloned().unwrap_or_else(|| NormStats::fit(raw));
        if norm_stats.mean.len() != raw.n_channels() {
            return Err(ModelError::DimensionMismatch { expected: raw.n_channels(), found: norm_stats.mean.len() });
        }
        let values: Vec<Vec<f64>> = raw
            .values
            .iter()
            .enumerate()
            .map(|(c, col)| col.iter().map(|v| norm_stats.standardize(c, *v)).collect())
            .collect();
        let patches = values
            .iter()
            .map(|col| col.chunks_exact(patch_len).map(<[f64]>::to_vec).collect())
            .collect();
        Ok(Self { values, patch_len, patches, norm_stats })
    }

    pub fn n_channels(&self) -> usize {
        self.values.len()
    }

    pub fn patches_per_channel(&self) -> usize {
        self.patches.first().map_or(0, Vec::len)
    }

    /// Back to raw units for one channel.
    pub fn destandardize(&self, channel: usize, z: &[f64]) -> Vec<f64> {
        z.iter().map(|v| self.norm_stats.destandardize(channel, *v)).collect()
    }

    /// Mean over every patch of every channel.
    pub fn mean_patch(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.patch_len];
        let mut n = 0usize;
        for ch in &self.patches {
            for p in ch {
                acc.iter_mut().zip(p).for_each(|(a, v)| *a += v);
                n += 1;
            }
        }
        acc.iter_mut().for_each(|a| *a /= n.max(1) as f64);
        acc
    }
}
