use std::path::Path;

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

use super::kernel::affine_batch;
use super::{History, ModelError, NormStats, PatchSeries, Result};
use crate::prob::GaussianHead;

const FORMAT_TAG: &str = "patchspec-model";
const FORMAT_VERSION: u32 = 1;
/// Floor for the default head scale when the fit is exact.
const MIN_SIGMA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Ridge-fit linear map from `k` lookback patches to the next patch.
    LinearAr,
    /// Repeats the last observed patch.
    Persistence,
    /// Ignores history and always predicts a fixed mean; the head is then
    /// identical at every step, which gives i.i.d. acceptance.
    SyntheticOracle,
}

/// Per-call replacements for the head scale and the draft mean perturbation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HeadOverrides {
    pub sigma: Option<f64>,
    pub bias: Option<f64>,
}

/// A forecaster with an isotropic Gaussian head of dimension `d = patch_len`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastModel {
    kind: ModelKind,
    dim: usize,
    lookback: usize,
    /// `d x (k d)`, columns ordered oldest patch first.
    weights: DMatrix<f64>,
    intercept: DVector<f64>,
    sigma: f64,
    residual_std: f64,
    mean_bias: f64,
    param_count: usize,
    mean_patch: Vec<f64>,
    norm_stats: Option<NormStats>,
    ridge: f64,
    scale: f64,
    seed: u64,
}

/// Lookback after capacity truncation: `max(1, round(scale * k))`.
pub(crate) fn truncated_lookback(k: usize, scale: f64) -> usize {
    ((scale * k as f64).round() as usize).max(1)
}

/// Fits a ridge-regularized linear AR model on every channel of `train`.
///
/// `scale < 1` emulates a smaller draft by truncating the lookback to
/// `max(1, round(scale * k))` patches. The intercept is not penalized, so as
/// `ridge` grows the weights vanish and predictions tend to the mean target
/// patch.
pub fn fit_linear_ar(train: &PatchSeries, lookback_patches: usize, ridge: f64, scale: f64) -> Result<ForecastModel> {
    if lookback_patches == 0 {
        return Err(ModelError::InvalidParameter("lookback_patches must be >= 1".into()));
    }
    if !(ridge.is_finite() && ridge >= 0.0) {
        return Err(ModelError::InvalidParameter(format!("ridge must be finite and >= 0, got {ridge}")));
    }
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(ModelError::InvalidParameter(format!("scale must lie in (0, 1], got {scale}")));
    }
    let available = train.patches_per_channel();
    if available < lookback_patches + 1 {
        return Err(ModelError::InsufficientData { needed: lookback_patches + 1, available });
    }
    let d = train.patch_len;
    let k = truncated_lookback(lookback_patches, scale);
    let features = k * d;

    let rows: usize = train.patches.iter().map(|ch| ch.len() - k).sum();
    let (x_mean, y_mean) = window_means(train, k, rows);

    // centered normal equations, accumulated over row blocks to bound memory
    let mut gram = DMatrix::<f64>::zeros(features, features);
    let mut rhs = DMatrix::<f64>::zeros(features, d);
    for_each_block(train, k, |xb, yb| {
        for mut row in xb.row_iter_mut() {
            row -= &x_mean;
        }
        for mut row in yb.row_iter_mut() {
            row -= &y_mean;
        }
        gram.gemm_tr(1.0, xb, xb, 1.0);
        rhs.gemm_tr(1.0, xb, yb, 1.0);
    });
    for i in 0..features {
        gram[(i, i)] += ridge;
    }
    let chol = gram.cholesky().ok_or(ModelError::Singular)?;
    if ridge == 0.0 {
        let l = chol.l_dirty();
        let diag: Vec<f64> = (0..features).map(|i| l[(i, i)].abs()).collect();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        if max == 0.0 || (min / max).powi(2) < 1e-13 {
            return Err(ModelError::Singular);
        }
    }
    let weights = chol.solve(&rhs).transpose();
    let intercept = y_mean.transpose() - &weights * x_mean.transpose();

    let mut sse = 0.0;
    for_each_block(train, k, |xb, yb| {
        let mut fitted = &*xb * weights.transpose();
        for mut row in fitted.row_iter_mut() {
            row += intercept.transpose();
        }
        sse += (&*yb - fitted).norm_squared();
    });
    let residual_std = (sse / (rows * d) as f64).sqrt();

    Ok(ForecastModel {
        kind: ModelKind::LinearAr,
        dim: d,
        lookback: k,
        weights,
        intercept,
        sigma: residual_std.max(MIN_SIGMA),
        residual_std,
        mean_bias: 0.0,
        param_count: d * features + d,
        mean_patch: train.mean_patch(),
        norm_stats: Some(train.norm_stats.clone()),
        ridge,
        scale,
        seed: 0,
    })
}

/// Rows per block when streaming the design matrix.
const FIT_BLOCK_ROWS: usize = 4096;

/// Calls `f(x, y)` on consecutive row blocks of the lagged design matrix,
/// channels in order.
fn for_each_block<F: FnMut(&mut DMatrix<f64>, &mut DMatrix<f64>)>(train: &PatchSeries, k: usize, mut f: F) {
    let d = train.patch_len;
    let features = k * d;
    for ch in &train.patches {
        let mut t0 = k;
        while t0 < ch.len() {
            let t1 = (t0 + FIT_BLOCK_ROWS).min(ch.len());
            let mut x = DMatrix::<f64>::zeros(t1 - t0, features);
            let mut y = DMatrix::<f64>::zeros(t1 - t0, d);
            for (r, t) in (t0..t1).enumerate() {
                for (j, patch) in ch[t - k..t].iter().enumerate() {
                    for (i, v) in patch.iter().enumerate() {
                        x[(r, j * d + i)] = *v;
                    }
                }
                for (i, v) in ch[t].iter().enumerate() {
                    y[(r, i)] = *v;
                }
            }
            f(&mut x, &mut y);
            t0 = t1;
        }
    }
}

/// Column means of the design matrix and of the targets, as row vectors.
fn window_means(train: &PatchSeries, k: usize, rows: usize) -> (RowDVector<f64>, RowDVector<f64>) {
    let d = train.patch_len;
    let mut xm = RowDVector::<f64>::zeros(k * d);
    let mut ym = RowDVector::<f64>::zeros(d);
    for_each_block(train, k, |x, y| {
        xm += x.row_sum();
        ym += y.row_sum();
    });
    (xm / rows as f64, ym / rows as f64)
}

fn check_sigma(sigma: f64) -> Result<f64> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(sigma)
    } else {
        Err(ModelError::InvalidParameter(format!("sigma must be positive and finite, got {sigma}")))
    }
}

impl ForecastModel {
    pub fn persistence(dim: usize, sigma: f64, mean_patch: Vec<f64>) -> Result<Self> {
        if mean_patch.len() != dim || dim == 0 {
            return Err(ModelError::DimensionMismatch { expected: dim, found: mean_patch.len() });
        }
        Ok(Self {
            kind: ModelKind::Persistence,
            dim,
            lookback: 1,
            weights: DMatrix::zeros(0, 0),
            intercept: DVector::zeros(dim),
            sigma: check_sigma(sigma)?,
            residual_std: 0.0,
            mean_bias: 0.0,
            param_count: 0,
            mean_patch,
            norm_stats: None,
            ridge: 0.0,
            scale: 1.0,
            seed: 0,
        })
    }

    pub fn synthetic_oracle(mean: Vec<f64>, sigma: f64) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 {
            return Err(ModelError::InvalidParameter("empty oracle mean".into()));
        }
        Ok(Self {
            kind: ModelKind::SyntheticOracle,
            dim,
            lookback: 1,
            weights: DMatrix::zeros(0, 0),
            intercept: DVector::from_vec(mean.clone()),
            sigma: check_sigma(sigma)?,
            residual_std: 0.0,
            mean_bias: 0.0,
            param_count: dim,
            mean_patch: mean,
            norm_stats: None,
            ridge: 0.0,
            scale: 1.0,
            seed: 0,
        })
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        self.sigma = check_sigma(sigma)?;
        Ok(self)
    }

    pub fn with_mean_bias(mut self, bias: f64) -> Result<Self> {
        if !(bias.is_finite() && bias >= 0.0) {
            return Err(ModelError::InvalidParameter(format!("mean_bias must be >= 0, got {bias}")));
        }
        self.mean_bias = bias;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn lookback_patches(&self) -> usize {
        self.lookback
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn residual_std(&self) -> f64 {
        self.residual_std
    }
    pub fn mean_bias(&self) -> f64 {
        self.mean_bias
    }
    pub fn param_count(&self) -> usize {
        self.param_count
    }
    pub fn mean_patch(&self) -> &[f64] {
        &self.mean_patch
    }
    pub fn norm_stats(&self) -> Option<&NormStats> {
        self.norm_stats.as_ref()
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }
    pub fn intercept(&self) -> &[f64] {
        self.intercept.as_slice()
    }

    fn check_history(&self, h: &History) -> Result<()> {
        if h.dim() != self.dim {
            return Err(ModelError::DimensionMismatch { expected: self.dim, found: h.dim() });
        }
        Ok(())
    }

    /// Point forecast of the patch following `h ++ extra`.
    pub fn point_forecast(&self, h: &History, extra: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.check_history(h)?;
        self.point_forecast_context(&h.window_extended(extra, self.lookback))
    }

    /// Point forecasts after every prefix `proposals[..i]`, `i = 0..=len`,
    /// computed as a single matrix product for linear models.
    pub fn point_forecast_batch(&self, h: &History, proposals: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check_history(h)?;
        self.point_forecast_context_batch(&h.prefix_windows(proposals, self.lookback), proposals.len() + 1)
    }

    fn check_context(&self, ctx: &[f64], extra: usize) -> Result<()> {
        let needed = (self.lookback + extra) * self.dim;
        if !ctx.len().is_multiple_of(self.dim) || ctx.len() < needed {
            return Err(ModelError::DimensionMismatch { expected: needed, found: ctx.len() });
        }
        Ok(())
    }

    /// Point forecast from a flat, oldest-first context whose last
    /// `lookback_patches() * dim()` values form the input window.
    pub fn point_forecast_context(&self, ctx: &[f64]) -> Result<Vec<f64>> {
        self.check_context(ctx, 0)?;
        let window = &ctx[ctx.len() - self.lookback * self.dim..];
        Ok(match self.kind {
            ModelKind::LinearAr => {
                let mut out = affine_batch(self.weights.as_slice(), self.dim, self.intercept.as_slice(), &[window]);
                out.pop().expect("one column")
            }
            ModelKind::Persistence => window[window.len() - self.dim..].to_vec(),
            ModelKind::SyntheticOracle => self.intercept.as_slice().to_vec(),
        })
    }

    /// Point forecasts from the `n` windows ending `n - 1, ..., 1, 0` patches
    /// before the end of `ctx`, in that order.
    pub fn point_forecast_context_batch(&self, ctx: &[f64], n: usize) -> Result<Vec<Vec<f64>>> {
        self.check_context(ctx, n.saturating_sub(1))?;
        let d = self.dim;
        let span = self.lookback * d;
        let first = ctx.len() - (n - 1) * d - span;
        match self.kind {
            ModelKind::LinearAr => {
                let refs: Vec<&[f64]> = (0..n).map(|i| &ctx[first + i * d..first + i * d + span]).collect();
                Ok(affine_batch(self.weights.as_slice(), d, self.intercept.as_slice(), &refs))
            }
            _ => (0..n).map(|i| self.point_forecast_context(&ctx[..first + i * d + span])).collect(),
        }
    }

    /// Wraps a point forecast into the model's Gaussian head, applying the
    /// sigma override and the mean perturbation along the first coordinate.
    pub fn head_from_mean(&self, mut mean: Vec<f64>, overrides: &HeadOverrides) -> Result<GaussianHead> {
        if mean.len() != self.dim {
            return Err(ModelError::DimensionMismatch { expected: self.dim, found: mean.len() });
        }
        let sigma = check_sigma(overrides.sigma.unwrap_or(self.sigma))?;
        let bias = overrides.bias.unwrap_or(self.mean_bias);
        if bias > 0.0 {
            mean[0] += bias;
        }
        Ok(GaussianHead::isotropic(mean, sigma * sigma)?)
    }

    pub fn predict(&self, h: &History, overrides: &HeadOverrides) -> Result<GaussianHead> {
        self.head_from_mean(self.point_forecast(h, &[])?, overrides)
    }

    pub fn predict_extended(&self, h: &History, extra: &[Vec<f64>], overrides: &HeadOverrides) -> Result<GaussianHead> {
        self.head_from_mean(self.point_forecast(h, extra)?, overrides)
    }

    pub fn predict_context(&self, ctx: &[f64], overrides: &HeadOverrides) -> Result<GaussianHead> {
        self.head_from_mean(self.point_forecast_context(ctx)?, overrides)
    }

    pub fn predict_context_batch(&self, ctx: &[f64], n: usize, overrides: &HeadOverrides) -> Result<Vec<GaussianHead>> {
        self.point_forecast_context_batch(ctx, n)?
            .into_iter()
            .map(|m| self.head_from_mean(m, overrides))
            .collect()
    }

    pub fn predict_batch(&self, h: &History, proposals: &[Vec<f64>], overrides: &HeadOverrides) -> Result<Vec<GaussianHead>> {
        self.point_forecast_batch(h, proposals)?
            .into_iter()
            .map(|m| self.head_from_mean(m, overrides))
            .collect()
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: FORMAT_TAG.into(),
            version: FORMAT_VERSION,
            kind: self.kind,
            patch_len: self.dim,
            lookback_patches: self.lookback,
            weights_shape: [self.weights.nrows(), self.weights.ncols()],
            weights: self.weights.transpose().as_slice().to_vec(),
            intercept: self.intercept.as_slice().to_vec(),
            sigma: self.sigma,
            residual_std: self.residual_std,
            mean_bias: self.mean_bias,
            param_count: self.param_count,
            mean_patch: self.mean_patch.clone(),
            norm_stats: self.norm_stats.clone(),
            ridge: self.ridge,
            scale: self.scale,
            seed: self.seed,
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(text).map_err(|e| ModelError::Format(e.to_string()))?;
        if f.format != FORMAT_TAG || f.version != FORMAT_VERSION {
            return Err(ModelError::Format(format!("unsupported format {} v{}", f.format, f.version)));
        }
        let [rows, cols] = f.weights_shape;
        if rows * cols != f.weights.len() || f.intercept.len() != f.patch_len || f.mean_patch.len() != f.patch_len {
            return Err(ModelError::Format("inconsistent shapes".into()));
        }
        if f.kind == ModelKind::LinearAr && (rows != f.patch_len || cols != f.lookback_patches * f.patch_len) {
            return Err(ModelError::Format("weights shape does not match patch_len and lookback".into()));
        }
        Ok(Self {
            kind: f.kind,
            dim: f.patch_len,
            lookback: f.lookback_patches,
            weights: DMatrix::from_row_slice(rows, cols, &f.weights),
            intercept: DVector::from_vec(f.intercept),
            sigma: check_sigma(f.sigma)?,
            residual_std: f.residual_std,
            mean_bias: f.mean_bias,
            param_count: f.param_count,
            mean_patch: f.mean_patch,
            norm_stats: f.norm_stats,
            ridge: f.ridge,
            scale: f.scale,
            seed: f.seed,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n")
            .map_err(|e| ModelError::Io { path: path.display().to_string(), message: e.to_string() })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    kind: ModelKind,
    patch_len: usize,
    lookback_patches: usize,
    weights_shape: [usize; 2],
    /// Row-major.
    weights: Vec<f64>,
    intercept: Vec<f64>,
    sigma: f64,
    residual_std: f64,
    mean_bias: f64,
    param_count: usize,
    mean_patch: Vec<f64>,
    norm_stats: Option<NormStats>,
    ridge: f64,
    scale: f64,
    seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{synthetic, RawSeries};

    fn seasonal_patches(period: usize, patch_len: usize, len: usize) -> PatchSeries {
        let raw = synthetic::exact_seasonal(len, 2, period, 0);
        PatchSeries::new(&raw, patch_len, None).unwrap()
    }

    #[test]
    fn exact_seasonal_fit_is_exact() {
        // season spans two patches, so the next patch equals the one two back
        let ps = seasonal_patches(16, 8, 800);
        let n = ps.patches_per_channel();
        let train = PatchSeries {
            patches: ps.patches.iter().map(|c| c[..n - 10].to_vec()).collect(),
            ..ps.clone()
        };
        let m = fit_linear_ar(&train, 4, 1e-10, 1.0).unwrap();
        assert!(m.residual_std() < 1e-5);
        let mut se = 0.0;
        let mut count = 0;
        for ch in &ps.patches {
            for t in n - 10..n {
                let h = History::from_patches(4, m.mean_patch().to_vec(), &ch[t - 4..t]).unwrap();
                let pred = m.point_forecast(&h, &[]).unwrap();
                se += pred.iter().zip(&ch[t]).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
                count += pred.len();
                let head = m.predict(&h, &HeadOverrides::default()).unwrap();
                for (a, b) in head.mean().iter().zip(&ch[t]) {
                    assert!((a - b).abs() < 1e-8);
                }
            }
        }
        assert!(se / (count as f64) <= 1e-10);
    }

    #[test]
    fn huge_ridge_collapses_to_mean_target_patch() {
        let raw = synthetic::seasonal_ar(&synthetic::SeasonalArConfig { len: 600, ..Default::default() });
        let ps = PatchSeries::new(&raw, 8, None).unwrap();
        let m = fit_linear_ar(&ps, 3, 1e12, 1.0).unwrap();
        assert!(m.weights().iter().all(|w| w.abs() < 1e-6));
        let mut target_mean = vec![0.0; 8];
        let mut n = 0.0;
        for ch in &ps.patches {
            for p in &ch[3..] {
                target_mean.iter_mut().zip(p).for_each(|(a, v)| *a += v);
                n += 1.0;
            }
        }
        let h = History::from_patches(3, m.mean_patch().to_vec(), &ps.patches[0][..3]).unwrap();
        let pred = m.point_forecast(&h, &[]).unwrap();
        for (a, b) in pred.iter().zip(&target_mean) {
            assert!((a - b / n).abs() < 1e-6);
        }
    }

    #[test]
    fn scale_truncates_lookback() {
        let raw = synthetic::seasonal_ar(&synthetic::SeasonalArConfig { len: 800, ..Default::default() });
        let ps = PatchSeries::new(&raw, 4, None).unwrap();
        let m = fit_linear_ar(&ps, 8, 1e-3, 0.25).unwrap();
        assert_eq!(m.lookback_patches(), 2);
        assert_eq!(m.param_count(), 4 * (2 * 4) + 4);
        assert_eq!(m.weights().shape(), (4, 8));
        assert_eq!(truncated_lookback(3, 0.1), 1);
    }

    #[test]
    fn singular_without_ridge() {
        let ps = seasonal_patches(8, 8, 400);
        assert!(matches!(fit_linear_ar(&ps, 2, 0.0, 1.0), Err(ModelError::Singular)));
        let msg = ModelError::Singular.to_string();
        assert!(msg.contains("ridge"));
    }

    #[test]
    fn parameter_validation() {
        let ps = seasonal_patches(8, 4, 40);
        assert!(matches!(fit_linear_ar(&ps, 20, 1.0, 1.0), Err(ModelError::InsufficientData { .. })));
        assert!(fit_linear_ar(&ps, 2, -1.0, 1.0).is_err());
        assert!(fit_linear_ar(&ps, 2, 1.0, 0.0).is_err());
        assert!(fit_linear_ar(&ps, 2, 1.0, 1.5).is_err());
    }

    #[test]
    fn persistence_and_overrides() {
        let m = ForecastModel::persistence(2, 0.5, vec![0.0, 0.0]).unwrap();
        let h = History::from_patches(1, vec![0.0, 0.0], &[vec![1.5, -2.0]]).unwrap();
        let head = m.predict(&h, &HeadOverrides::default()).unwrap();
        assert_eq!(head.mean(), &[1.5, -2.0]);
        let head = m.predict(&h, &HeadOverrides { sigma: Some(0.6), bias: None }).unwrap();
        assert!(head.variance().iter().all(|v| (v - 0.36).abs() < 1e-15));
        let biased = m.predict(&h, &HeadOverrides { sigma: None, bias: Some(0.75) }).unwrap();
        let shift: f64 = biased.mean().iter().zip(head.mean()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!((shift - 0.75).abs() < 1e-12);
        let wrong = History::new(1, vec![0.0; 3]).unwrap();
        assert!(matches!(m.predict(&wrong, &HeadOverrides::default()), Err(ModelError::DimensionMismatch { .. })));
    }

    #[test]
    fn predict_is_deterministic_and_batch_matches_single() {
        let raw = synthetic::seasonal_ar(&synthetic::SeasonalArConfig { len: 800, ..Default::default() });
        let ps = PatchSeries::new(&raw, 4, None).unwrap();
        let m = fit_linear_ar(&ps, 4, 1e-3, 1.0).unwrap();
        let h = History::from_patches(4, m.mean_patch().to_vec(), &ps.patches[0][..3]).unwrap();
        let a = m.predict(&h, &HeadOverrides::default()).unwrap();
        let b = m.predict(&h, &HeadOverrides::default()).unwrap();
        assert_eq!(a, b);
        let props = vec![ps.patches[0][3].clone(), ps.patches[0][4].clone()];
        let batch = m.point_forecast_batch(&h, &props).unwrap();
        for i in 0..=2 {
            let single = m.point_forecast(&h, &props[..i]).unwrap();
            for (x, y) in single.iter().zip(&batch[i]) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let raw: RawSeries = synthetic::seasonal_ar(&synthetic::SeasonalArConfig { len: 400, ..Default::default() });
        let ps = PatchSeries::new(&raw, 4, None).unwrap();
        let m = fit_linear_ar(&ps, 3, 1e-2, 1.0).unwrap().with_mean_bias(0.5).unwrap().with_seed(9);
        let back = ForecastModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), m.to_json());
        assert!(ForecastModel::from_json("{}").is_err());
    }
}
