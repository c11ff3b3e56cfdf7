use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::spec::{CostSpec, DatasetSpec, ExperimentSpec};
use super::{HarnessError, Result};
use crate::analysis::{estimate_alpha, AcceptanceEstimate, CostModel, PredictorReport};
use crate::engine::{decode, DecodeConfig, DecodeTrace, Variant};
use crate::model::{fit_linear_ar, load_csv, metrics, synthetic, ForecastModel, HeadOverrides, History, NormStats, PatchSeries, RawSeries};
use crate::stats::median;

/// Target passes faster than this cannot be timed reliably.
const MIN_TIMED_PASS: f64 = 1e-6;

/// Patch-index boundaries of the chronological split: train `[0, train_end)`,
/// validation `[train_end, val_end)`, test `[val_end, n_patches)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitBounds {
    pub train_end: usize,
    pub val_end: usize,
    pub n_patches: usize,
    pub patch_len: usize,
}

impl SplitBounds {
    /// Timestep ranges of the three splits.
    pub fn timestep_ranges(&self) -> [std::ops::Range<usize>; 3] {
        let p = self.patch_len;
        [0..self.train_end * p, self.train_end * p..self.val_end * p, self.val_end * p..self.n_patches * p]
    }
}

/// Loaded, standardized and split data for one experiment.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub raw: RawSeries,
    pub stats: NormStats,
    /// Whole series patched with train statistics.
    pub full: PatchSeries,
    /// Train prefix only.
    pub train: PatchSeries,
    pub bounds: SplitBounds,
}

pub fn prepare(spec: &ExperimentSpec) -> Result<PreparedData> {
    spec.validate()?;
    let raw = match &spec.dataset {
        DatasetSpec::Csv { path, schema } => load_csv(path, schema)?,
        DatasetSpec::Synthetic(cfg) => synthetic::seasonal_ar(cfg),
    };
    let p = spec.patch_len;
    let n_patches = raw.len() / p;
    let train_end = (spec.splits.train * n_patches as f64).floor() as usize;
    let val_end = ((spec.splits.train + spec.splits.val) * n_patches as f64).floor() as usize;
    let k = spec.lookback_patches;
    let hp = spec.horizon_patches();
    if train_end < k + 1 {
        return Err(HarnessError::InsufficientData(format!(
            "train split has {train_end} patches per channel, need at least {}",
            k + 1
        )));
    }
    if val_end <= train_end {
        return Err(HarnessError::InsufficientData("validation split is empty".into()));
    }
    if n_patches < val_end + hp {
        return Err(HarnessError::InsufficientData(format!(
            "test split has {} patches per channel, horizon needs {hp}",
            n_patches.saturating_sub(val_end)
        )));
    }
    let train_raw = raw.slice(0, train_end * p);
    let stats = NormStats::fit(&train_raw);
    let full = PatchSeries::new(&raw, p, Some(&stats))?;
    let train = PatchSeries::new(&train_raw, p, Some(&stats))?;
    Ok(PreparedData { raw, stats, full, train, bounds: SplitBounds { train_end, val_end, n_patches, patch_len: p } })
}

/// One fully resolved coordinate of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub variant: Variant,
    /// `None` keeps the target's fitted scale.
    pub sigma: Option<f64>,
    /// `None` for single-model baselines.
    pub gamma: Option<usize>,
    pub draft_scale: Option<f64>,
    pub bias: Option<f64>,
    pub tolerance_lambda: Option<f64>,
    pub seed: u64,
}

impl SweepPoint {
    pub fn label(&self) -> String {
        let mut s = self.variant.as_str().to_string();
        if let Some(sc) = self.draft_scale {
            s += &format!(" scale={sc}");
        }
        match self.sigma {
            Some(v) => s += &format!(" sigma={v}"),
            None => s += " sigma=fit",
        }
        if let Some(g) = self.gamma {
            s += &format!(" gamma={g}");
        }
        if let Some(b) = self.bias.filter(|b| *b > 0.0) {
            s += &format!(" bias={b}");
        }
        if let Some(l) = self.tolerance_lambda.filter(|l| *l != 1.0) {
            s += &format!(" lambda={l}");
        }
        s
    }
}

fn expand(spec: &ExperimentSpec) -> Vec<SweepPoint> {
    let s = &spec.sweep;
    let mut out: Vec<SweepPoint> = Vec::new();
    for &seed in &spec.seeds {
        for &variant in &s.variants {
            for &sigma in &s.sigmas {
                match variant {
                    Variant::TargetOnly => out.push(SweepPoint {
                        variant,
                        sigma,
                        gamma: None,
                        draft_scale: None,
                        bias: None,
                        tolerance_lambda: None,
                        seed,
                    }),
                    Variant::DraftOnly => {
                        for &sc in &s.draft_scales {
                            for &b in &s.biases {
                                out.push(SweepPoint {
                                    variant,
                                    sigma,
                                    gamma: None,
                                    draft_scale: Some(sc),
                                    bias: Some(b),
                                    tolerance_lambda: None,
                                    seed,
                                });
                            }
                        }
                    }
                    Variant::Practical | Variant::Lossless => {
                        for &sc in &s.draft_scales {
                            for &b in &s.biases {
                                for &g in &s.gammas {
                                    for &l in &s.tolerance_lambdas {
                                        out.push(SweepPoint {
                                            variant,
                                            sigma,
                                            gamma: Some(g),
                                            draft_scale: Some(sc),
                                            bias: Some(b),
                                            tolerance_lambda: Some(l),
                                            seed,
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let mut seen = Vec::new();
    out.retain(|p| {
        let key = serde_json::to_string(p).expect("point serializes");
        if seen.contains(&key) {
            false
        } else {
            seen.push(key);
            true
        }
    });
    out
}

/// Metrics, measurements and predictions for one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub dataset: String,
    pub point: SweepPoint,
    pub sigma_used: f64,
    pub mse: f64,
    pub mae: f64,
    /// Accepted / scored proposals over all decoded windows.
    pub alpha_hat_empirical: Option<f64>,
    /// Held-out per-history overlap estimate at this point's heads.
    pub alpha_hat_heldout: Option<AcceptanceEstimate>,
    pub mean_n: Option<f64>,
    pub mean_l: Option<f64>,
    pub rounds: usize,
    pub target_param_count: usize,
    pub draft_param_count: Option<usize>,
    pub mean_residual_draws: Option<f64>,
    pub report: Option<PredictorReport>,
    /// Measured draft/target time per forward pass.
    pub c_measured: Option<f64>,
    pub cost: Option<CostModel>,
    /// Baseline time / run time over the same windows.
    pub s_wall_measured: f64,
    pub run_seconds: f64,
    pub baseline_seconds: f64,
}

impl RunResult {
    /// A copy with every machine-dependent field cleared.
    pub fn without_timing(&self) -> RunResult {
        let mut r = self.clone();
        r.c_measured = None;
        r.cost = None;
        r.s_wall_measured = 0.0;
        r.run_seconds = 0.0;
        r.baseline_seconds = 0.0;
        if let Some(rep) = &mut r.report {
            rep.cost = CostModel { c: 1.0, c_hat: rep.cost.c_hat, source: crate::analysis::CostSource::Configured };
            rep.s_wall_pred = 0.0;
            rep.s_wall_meas = None;
            rep.deltas.s_wall = None;
        }
        r
    }
}

/// Hex SHA-256 over the timing-free JSON of every result, in order.
pub fn determinism_digest(results: &[RunResult]) -> String {
    let mut h = Sha256::new();
    for r in results {
        h.update(serde_json::to_vec(&r.without_timing()).expect("result serializes"));
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

struct Window {
    channel: usize,
    start: usize,
}

fn windows(data: &PreparedData, k: usize, hp: usize, per_channel: usize) -> Vec<Window> {
    let b = data.bounds;
    let first = b.val_end.max(k);
    let last = b.n_patches - hp;
    let mut out = Vec::new();
    if last < first {
        return out;
    }
    let span = last - first;
    let count = per_channel.min(span + 1);
    for ch in 0..data.full.n_channels() {
        for i in 0..count {
            let start = if count == 1 { first } else { first + i * span / (count - 1) };
            out.push(Window { channel: ch, start });
        }
    }
    out
}

fn history_at(data: &PreparedData, model: &ForecastModel, channel: usize, start: usize, k: usize) -> Result<History> {
    let patches = &data.full.patches[channel];
    let from = start.saturating_sub(k);
    Ok(History::from_patches(k, model.mean_patch().to_vec(), &patches[from..start])?)
}

fn time_passes(model: &ForecastModel, histories: &[History], passes: usize) -> Result<f64> {
    let ov = HeadOverrides::default();
    for h in histories.iter().take(8) {
        std::hint::black_box(model.predict(h, &ov)?);
    }
    let mut times = Vec::with_capacity(passes);
    for i in 0..passes {
        let h = &histories[i % histories.len()];
        let t = Instant::now();
        std::hint::black_box(model.predict(h, &ov)?);
        times.push(t.elapsed().as_secs_f64());
    }
    Ok(median(&times))
}

fn measure_cost(spec: &ExperimentSpec, target: &ForecastModel, draft: &ForecastModel, val: &[History]) -> Result<(CostModel, Option<f64>)> {
    let c_hat = draft.param_count() as f64 / target.param_count() as f64;
    match spec.cost {
        CostSpec::Configured { c, c_hat } => Ok((CostModel::configured(c, c_hat)?, None)),
        CostSpec::Measure { passes, fallback_c } => {
            let t_target = time_passes(target, val, passes)?;
            let t_draft = time_passes(draft, val, passes)?;
            if t_target < MIN_TIMED_PASS {
                log::warn!(
                    "target pass takes {:.3} us, below timer resolution; using configured c = {fallback_c}",
                    t_target * 1e6
                );
                return Ok((CostModel::configured(fallback_c, c_hat)?, None));
            }
            let c = t_draft / t_target;
            Ok((CostModel::measured(c, c_hat, passes, passes)?, Some(c)))
        }
    }
}

struct Decoded {
    mse: f64,
    mae: f64,
    trace: DecodeTrace,
}

fn decode_windows(
    data: &PreparedData,
    target: &ForecastModel,
    draft: &ForecastModel,
    cfg: &DecodeConfig,
    wins: &[Window],
    horizon: usize,
) -> Result<Decoded> {
    let k = target.lookback_patches().max(draft.lookback_patches());
    let hp = cfg.horizon_patches;
    let mut forecasts = Vec::with_capacity(wins.len());
    let mut truths = Vec::with_capacity(wins.len());
    let mut trace = DecodeTrace::default();
    for (lane, w) in wins.iter().enumerate() {
        let h0 = history_at(data, target, w.channel, w.start, k)?;
        let (out, tr) = decode(target, draft, &h0, &cfg.for_lane(lane as u64))?;
        let flat: Vec<f64> = out.concat().into_iter().take(horizon).collect();
        let truth: Vec<f64> = data.full.patches[w.channel][w.start..w.start + hp].concat().into_iter().take(horizon).collect();
        forecasts.push(flat);
        truths.push(truth);
        trace.merge(tr);
    }
    let m = metrics(&forecasts, &truths)?;
    Ok(Decoded { mse: m.mse, mae: m.mae, trace })
}

/// Shared pieces for every point of one experiment.
struct Context<'a> {
    spec: &'a ExperimentSpec,
    data: &'a PreparedData,
    target: ForecastModel,
    drafts: BTreeMap<u64, ForecastModel>,
    wins: Vec<Window>,
    val_histories: Vec<History>,
}

fn scale_key(s: f64) -> u64 {
    s.to_bits()
}

fn dataset_name(spec: &ExperimentSpec) -> String {
    match &spec.dataset {
        DatasetSpec::Csv { path, .. } => path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        DatasetSpec::Synthetic(_) => "synthetic_seasonal_ar".into(),
    }
}

fn decode_config(spec: &ExperimentSpec, point: &SweepPoint) -> DecodeConfig {
    DecodeConfig {
        gamma: point.gamma.unwrap_or(1),
        variant: point.variant,
        tolerance_lambda: point.tolerance_lambda.unwrap_or(1.0),
        horizon_patches: spec.horizon_patches(),
        seed: point.seed,
        sigma_target: point.sigma,
        sigma_draft: point.sigma,
        draft_bias: point.bias,
        variance_sharing: spec.variance_sharing,
    }
}

fn timed<F: FnMut() -> Result<Decoded>>(mut f: F) -> Result<(Decoded, f64)> {
    let d = f()?;
    let t = d.trace.wall_times.total;
    Ok((d, t))
}

/// Runs one sweep point against prepared data and fitted models.
pub fn run_point(
    spec: &ExperimentSpec,
    data: &PreparedData,
    target: &ForecastModel,
    draft: &ForecastModel,
    point: &SweepPoint,
) -> Result<RunResult> {
    let k = target.lookback_patches().max(draft.lookback_patches());
    let wins = windows(data, k, spec.horizon_patches(), spec.test_windows);
    let val_histories = validation_histories(spec, data, target, k)?;
    let ctx = Context {
        spec,
        data,
        target: target.clone(),
        drafts: BTreeMap::from([(scale_key(point.draft_scale.unwrap_or(1.0)), draft.clone())]),
        wins,
        val_histories,
    };
    run_with(&ctx, point)
}

fn validation_histories(spec: &ExperimentSpec, data: &PreparedData, target: &ForecastModel, k: usize) -> Result<Vec<History>> {
    let b = data.bounds;
    let first = b.train_end.max(k);
    if b.val_end <= first {
        return Err(HarnessError::InsufficientData("validation split shorter than the lookback".into()));
    }
    let span = b.val_end - first;
    let channels = data.full.n_channels();
    let n = spec.heldout_histories;
    (0..n)
        .map(|i| {
            let ch = i % channels;
            let start = first + (i / channels) * span / n.div_ceil(channels).max(1);
            history_at(data, target, ch, start.min(b.val_end - 1), k)
        })
        .collect()
}

fn run_with(ctx: &Context, point: &SweepPoint) -> Result<RunResult> {
    let spec = ctx.spec;
    let target = &ctx.target;
    let cfg = decode_config(spec, point);
    let draft = match point.draft_scale {
        Some(s) => ctx.drafts.get(&scale_key(s)).expect("draft fitted for every scale"),
        None => target,
    };
    let horizon = spec.horizon;
    let baseline_cfg = DecodeConfig { variant: Variant::TargetOnly, sigma_target: None, sigma_draft: None, ..cfg.clone() };

    // warm caches before timing
    let warm = &ctx.wins[..ctx.wins.len().min(4)];
    decode_windows(ctx.data, target, draft, &cfg, warm, horizon)?;

    let mut run_times = Vec::new();
    let mut base_times = Vec::new();
    let mut run = None;
    for _ in 0..spec.timing_repeats {
        let (_, tb) = timed(|| decode_windows(ctx.data, target, target, &baseline_cfg, &ctx.wins, horizon))?;
        let (d, tr) = timed(|| decode_windows(ctx.data, target, draft, &cfg, &ctx.wins, horizon))?;
        base_times.push(tb);
        run_times.push(tr);
        run = Some(d);
    }
    let run = run.expect("at least one repeat");
    let run_seconds = median(&run_times);
    let baseline_seconds = median(&base_times);
    let s_wall_measured = if point.variant == Variant::TargetOnly { 1.0 } else { baseline_seconds / run_seconds };

    let (ov_t, ov_d) = cfg.overrides(target, draft);
    let sigma_used = match point.variant {
        Variant::TargetOnly => point.sigma.unwrap_or(target.sigma()),
        Variant::DraftOnly => point.sigma.unwrap_or(draft.sigma()),
        _ => ov_t.sigma.expect("resolved sigma"),
    };

    let mut result = RunResult {
        dataset: dataset_name(spec),
        point: point.clone(),
        sigma_used,
        mse: run.mse,
        mae: run.mae,
        alpha_hat_empirical: None,
        alpha_hat_heldout: None,
        mean_n: None,
        mean_l: None,
        rounds: run.trace.rounds.len(),
        target_param_count: target.param_count(),
        draft_param_count: point.draft_scale.map(|_| draft.param_count()),
        mean_residual_draws: run.trace.mean_residual_draws(),
        report: None,
        c_measured: None,
        cost: None,
        s_wall_measured,
        run_seconds,
        baseline_seconds,
    };

    if point.variant.is_speculative() {
        let pairs = ctx
            .val_histories
            .iter()
            .map(|h| Ok((target.predict(h, &ov_t)?, draft.predict(h, &ov_d)?)))
            .collect::<Result<Vec<_>>>()?;
        let est = estimate_alpha(&pairs, spec.estimate)?;
        let (cost, c_measured) = measure_cost(spec, target, draft, &ctx.val_histories)?;
        let report = PredictorReport::predict(est.alpha_bar_hat, cfg.gamma, cost)?.with_trace(&run.trace, Some(s_wall_measured))?;
        result.alpha_hat_empirical = run.trace.empirical_acceptance();
        result.alpha_hat_heldout = Some(est);
        result.mean_n = run.trace.mean_run_length();
        result.mean_l = run.trace.mean_outputs();
        result.report = Some(report);
        result.c_measured = c_measured;
        result.cost = Some(cost);
    }
    Ok(result)
}

/// Fits the target and every draft scale on the train split, then runs the
/// sweep. Fitting runs on `spec.workers` threads; decoding and timing run
/// sequentially so measurements do not contend. Results follow sweep order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<RunResult>> {
    let data = prepare(spec)?;
    run_prepared(spec, &data)
}

fn run_prepared(spec: &ExperimentSpec, data: &PreparedData) -> Result<Vec<RunResult>> {
    let k = spec.lookback_patches;
    let mut scales: Vec<f64> = vec![1.0];
    scales.extend(spec.sweep.draft_scales.iter().copied().filter(|s| *s != 1.0));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers.max(1))
        .build()
        .map_err(|e| HarnessError::InvalidSpec(format!("worker pool: {e}")))?;
    let fitted: Vec<(f64, ForecastModel)> = pool.install(|| {
        scales
            .par_iter()
            .map(|&s| Ok((s, fit_linear_ar(&data.train, k, spec.ridge, s)?)))
            .collect::<Result<Vec<_>>>()
    })?;
    let target = fitted[0].1.clone();
    let mut drafts: BTreeMap<u64, ForecastModel> = fitted.into_iter().map(|(s, m)| (scale_key(s), m)).collect();
    drafts.entry(scale_key(1.0)).or_insert_with(|| target.clone());
    log::info!(
        "fitted target (lookback {k}, sigma {:.4}, {} params) and {} draft(s)",
        target.sigma(),
        target.param_count(),
        spec.sweep.draft_scales.len()
    );
    let wins = windows(data, k, spec.horizon_patches(), spec.test_windows);
    if wins.is_empty() {
        return Err(HarnessError::InsufficientData("no test windows fit the horizon".into()));
    }
    let val_histories = validation_histories(spec, data, &target, k)?;
    let ctx = Context { spec, data, target, drafts, wins, val_histories };
    expand(spec)
        .iter()
        .map(|p| {
            let r = run_with(&ctx, p)?;
            log::info!("{}: mse {:.4} S_meas {:.3}", p.label(), r.mse, r.s_wall_measured);
            Ok(r)
        })
        .collect()
}
