use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};
use crate::analysis::EstimateMode;
use crate::engine::Variant;
use crate::model::synthetic::SeasonalArConfig;
use crate::model::CsvSchema;
use crate::prob::VarianceSharing;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Csv {
        path: PathBuf,
        #[serde(default = "CsvSchema::ett")]
        schema: CsvSchema,
    },
    /// Generated in memory from a seeded recipe.
    Synthetic(SeasonalArConfig),
}

/// Chronological split fractions; whatever is left after train and val is test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub train: f64,
    pub val: f64,
}

impl Default for Splits {
    fn default() -> Self {
        Self { train: 0.7, val: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostSpec {
    Configured { c: f64, c_hat: f64 },
    /// Median of `passes` timed single forward passes per model; falls back
    /// to `fallback_c` when the target pass is below timer resolution.
    Measure { passes: usize, fallback_c: f64 },
}

impl Default for CostSpec {
    fn default() -> Self {
        CostSpec::Measure { passes: 200, fallback_c: 0.25 }
    }
}

/// Sweep axes. `None` in `sigmas` means the target model's fitted scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepAxes {
    pub sigmas: Vec<Option<f64>>,
    pub gammas: Vec<usize>,
    pub variants: Vec<Variant>,
    pub draft_scales: Vec<f64>,
    pub biases: Vec<f64>,
    pub tolerance_lambdas: Vec<f64>,
}

impl Default for SweepAxes {
    fn default() -> Self {
        Self {
            sigmas: vec![None],
            gammas: vec![3],
            variants: vec![Variant::TargetOnly, Variant::Practical],
            draft_scales: vec![0.25],
            biases: vec![0.0],
            tolerance_lambdas: vec![1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub name: String,
    pub dataset: DatasetSpec,
    pub patch_len: usize,
    pub lookback_patches: usize,
    pub ridge: f64,
    pub splits: Splits,
    /// Forecast horizon in timesteps; decoded as `ceil(horizon / patch_len)`
    /// patches and scored on the first `horizon` steps.
    pub horizon: usize,
    pub sweep: SweepAxes,
    pub seeds: Vec<u64>,
    pub cost: CostSpec,
    /// Validation histories used for the held-out acceptance estimate.
    pub heldout_histories: usize,
    pub estimate: EstimateMode,
    /// Test windows decoded per channel (evenly spaced).
    pub test_windows: usize,
    /// Baseline/run timing repetitions; the median of each side is used.
    pub timing_repeats: usize,
    pub variance_sharing: VarianceSharing,
    pub workers: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            dataset: DatasetSpec::Synthetic(SeasonalArConfig::default()),
            patch_len: 16,
            lookback_patches: 8,
            ridge: 1e-3,
            splits: Splits::default(),
            horizon: 96,
            sweep: SweepAxes::default(),
            seeds: vec![0],
            cost: CostSpec::default(),
            heldout_histories: 512,
            estimate: EstimateMode::ClosedForm,
            test_windows: 32,
            timing_repeats: 3,
            variance_sharing: VarianceSharing::Shared,
            workers: 1,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(HarnessError::InvalidSpec(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ExperimentSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Io { path: path.display().to_string(), message: e.to_string() })?;
        let mut spec: ExperimentSpec = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Io { path: path.display().to_string(), message: e.to_string() })?;
        // dataset paths are relative to the spec file
        if let DatasetSpec::Csv { path: data, .. } = &mut spec.dataset {
            if data.is_relative() {
                if let Some(dir) = path.parent() {
                    *data = dir.join(&*data);
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn horizon_patches(&self) -> usize {
        self.horizon.div_ceil(self.patch_len.max(1))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::InvalidSpec(m));
        if self.patch_len == 0 || self.lookback_patches == 0 || self.horizon == 0 {
            return bad("patch_len, lookback_patches and horizon must be >= 1".into());
        }
        if !(self.ridge.is_finite() && self.ridge >= 0.0) {
            return bad(format!("ridge must be >= 0, got {}", self.ridge));
        }
        let Splits { train, val } = self.splits;
        if !(train > 0.0 && val > 0.0 && train + val < 1.0) {
            return bad(format!("split fractions must be positive with train + val < 1, got {train} / {val}"));
        }
        let s = &self.sweep;
        if s.sigmas.is_empty() || s.variants.is_empty() || s.gammas.is_empty() || self.seeds.is_empty() {
            return bad("sweep axes and seeds must be non-empty".into());
        }
        if s.variants.iter().any(|v| v.is_speculative() || *v == Variant::DraftOnly) && (s.draft_scales.is_empty() || s.biases.is_empty()) {
            return bad("draft variants need draft_scales and biases".into());
        }
        for sigma in s.sigmas.iter().flatten() {
            positive("sigma", *sigma)?;
        }
        for lam in &s.tolerance_lambdas {
            positive("tolerance_lambda", *lam)?;
        }
        for sc in &s.draft_scales {
            if !(*sc > 0.0 && *sc <= 1.0) {
                return bad(format!("draft scale must lie in (0, 1], got {sc}"));
            }
        }
        if s.gammas.contains(&0) {
            return bad("gamma must be >= 1".into());
        }
        if s.biases.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return bad("bias must be >= 0".into());
        }
        match self.cost {
            CostSpec::Configured { c, c_hat } => {
                positive("c", c)?;
                positive("c_hat", c_hat)?;
            }
            CostSpec::Measure { passes, fallback_c } => {
                if passes < 100 {
                    return bad(format!("cost measurement needs >= 100 passes, got {passes}"));
                }
                positive("fallback_c", fallback_c)?;
            }
        }
        if self.heldout_histories == 0 || self.test_windows == 0 || self.timing_repeats == 0 {
            return bad("heldout_histories, test_windows and timing_repeats must be >= 1".into());
        }
        Ok(())
    }
}
