//! One function per subcommand.

use std::path::Path;

use patchspec::analysis::PredictorSummary;
use patchspec::engine::{decode as run_decode, DecodeConfig, DecodeTrace};
use patchspec::harness::{
    calibrate as calibration_rows, calibration_text, determinism_digest, run_experiment, tradeoff_table, tradeoff_text,
    CalibrationRow, ExperimentSpec, RunResult,
};
use patchspec::model::{fit_linear_ar, load_csv, CsvSchema, ForecastModel, History, ModelError, NormStats, PatchSeries, RawSeries};
use patchspec::prob::VarianceSharing;
use patchspec::validation::{run_suites, Suite};
use serde_json::json;

use crate::manifest::OutputDir;
use crate::{CalibrateArgs, CliError, DataArgs, DecodeArgs, FitArgs, Outcome, PredictArgs, ScanArgs, ValidateArgs};

type Result<T> = std::result::Result<T, CliError>;

fn absolute(p: &Path) -> String {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf()).display().to_string()
}

fn schema(d: &DataArgs) -> CsvSchema {
    CsvSchema {
        timestamp_col: (!d.timestamp_col.is_empty()).then(|| d.timestamp_col.clone()),
        channel_cols: d.channels.clone(),
    }
}

fn load_data(d: &DataArgs) -> Result<RawSeries> {
    if !d.data.exists() {
        return Err(CliError::io(&d.data, "no such file"));
    }
    Ok(load_csv(&d.data, &schema(d))?)
}

fn data_config(d: &DataArgs) -> serde_json::Value {
    json!({ "data": absolute(&d.data), "schema": schema(d) })
}

fn json_line<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializable") + "\n"
}

pub fn fit(out: &Path, a: &FitArgs) -> Result<Outcome> {
    if !(a.train_frac > 0.0 && a.train_frac <= 1.0) {
        return Err(CliError::Usage(format!("--train-frac must lie in (0, 1], got {}", a.train_frac)));
    }
    if a.patch_len == 0 {
        return Err(CliError::Usage("--patch-len must be >= 1".into()));
    }
    let raw = load_data(&a.data)?;
    let n_patches = raw.len() / a.patch_len;
    let train_patches = (a.train_frac * n_patches as f64).floor() as usize;
    let train_raw = raw.slice(0, train_patches * a.patch_len);
    let stats = NormStats::fit(&train_raw);
    let train = PatchSeries::new(&train_raw, a.patch_len, Some(&stats))?;
    let mut model = fit_linear_ar(&train, a.lookback, a.ridge, a.scale)?.with_seed(a.seed);
    if let Some(s) = a.sigma {
        model = model.with_sigma(s)?;
    }
    if let Some(b) = a.bias {
        model = model.with_mean_bias(b)?;
    }

    let mut dir = OutputDir::create(out)?;
    let model_file = format!("{}.json", a.name);
    let model_path = dir.write(&model_file, (model.to_json() + "\n").as_bytes())?;
    let report = json!({
        "model": model_file,
        "kind": model.kind(),
        "patch_len": model.dim(),
        "lookback_patches": model.lookback_patches(),
        "param_count": model.param_count(),
        "residual_std": model.residual_std(),
        "sigma": model.sigma(),
        "mean_bias": model.mean_bias(),
        "ridge": a.ridge,
        "scale": a.scale,
        "channels": raw.n_channels(),
        "train_timesteps": train_raw.len(),
    });
    dir.write(&format!("{}.fit.json", a.name), (serde_json::to_string_pretty(&report).expect("json") + "\n").as_bytes())?;
    let config = json!({
        "input": data_config(&a.data),
        "patch_len": a.patch_len,
        "lookback_patches": a.lookback,
        "ridge": a.ridge,
        "scale": a.scale,
        "train_frac": a.train_frac,
        "sigma": a.sigma,
        "bias": a.bias,
        "name": a.name,
    });
    dir.finish("fit", config, vec![a.seed], None)?;

    println!("model:         {}", model_path.display());
    println!("param_count:   {}", model.param_count());
    println!("lookback:      {} patches of {}", model.lookback_patches(), model.dim());
    println!("residual_std:  {:e}", model.residual_std());
    println!("sigma:         {}", model.sigma());
    Ok(Outcome::Passed)
}

fn load_model(path: &Path) -> Result<ForecastModel> {
    if !path.exists() {
        return Err(CliError::io(path, "no such file"));
    }
    Ok(ForecastModel::load(path)?)
}

pub fn decode(out: &Path, a: &DecodeArgs) -> Result<Outcome> {
    let target = load_model(&a.target)?;
    let draft = match &a.draft {
        Some(p) => load_model(p)?,
        None => target.clone(),
    };
    if draft.dim() != target.dim() {
        return Err(ModelError::DimensionMismatch { expected: target.dim(), found: draft.dim() }.into());
    }
    if a.horizon == 0 {
        return Err(CliError::Usage("--horizon must be >= 1".into()));
    }
    let raw = load_data(&a.data)?;
    let p = target.dim();
    let stats = match target.norm_stats() {
        Some(s) => s.clone(),
        None => NormStats::fit(&raw),
    };
    if stats.mean.len() != raw.n_channels() {
        return Err(ModelError::DimensionMismatch { expected: stats.mean.len(), found: raw.n_channels() }.into());
    }
    let end = a.end.unwrap_or(raw.len());
    if end > raw.len() {
        return Err(CliError::Usage(format!("--end {end} is past the end of the series ({} timesteps)", raw.len())));
    }
    let end_patch = end / p;
    let start = end_patch * p;
    let series = PatchSeries::new(&raw.slice(0, start), p, Some(&stats))?;

    let cfg = DecodeConfig {
        gamma: a.gamma,
        variant: a.variant,
        tolerance_lambda: a.tolerance_lambda,
        horizon_patches: a.horizon.div_ceil(p),
        seed: a.seed,
        sigma_target: a.sigma,
        sigma_draft: a.sigma,
        draft_bias: a.bias,
        variance_sharing: if a.unequal_variance { VarianceSharing::Unequal } else { VarianceSharing::Shared },
    };
    let k = target.lookback_patches().max(draft.lookback_patches());
    let mut csv = String::from("timestep,channel,value,value_destandardized\n");
    let mut trace = DecodeTrace::default();
    for (ch, name) in raw.channel_names.iter().enumerate() {
        let patches = &series.patches[ch];
        let h0 = History::from_patches(k, target.mean_patch().to_vec(), &patches[end_patch.saturating_sub(k)..end_patch])?;
        let (forecast, tr) = run_decode(&target, &draft, &h0, &cfg.for_lane(ch as u64))?;
        for (i, z) in forecast.concat().into_iter().take(a.horizon).enumerate() {
            csv += &format!("{},{name},{z},{}\n", start + i, stats.destandardize(ch, z));
        }
        trace.merge(tr);
    }

    let mut dir = OutputDir::create(out)?;
    let forecast_path = dir.write("forecast.csv", csv.as_bytes())?;
    let mut jsonl = Vec::new();
    trace.write_jsonl(&mut jsonl).map_err(|e| CliError::io(&dir.path("trace.jsonl"), e))?;
    dir.write("trace.jsonl", &jsonl)?;
    let summary = json!({
        "variant": a.variant,
        "rounds": trace.rounds.len(),
        "totals": trace.totals,
        "alpha_hat_empirical": trace.empirical_acceptance(),
        "mean_n": trace.mean_run_length(),
        "mean_l": trace.mean_outputs(),
        "mean_residual_draws": trace.mean_residual_draws(),
    });
    dir.write("decode.json", (serde_json::to_string_pretty(&summary).expect("json") + "\n").as_bytes())?;
    let config = json!({
        "input": data_config(&a.data),
        "target": absolute(&a.target),
        "draft": a.draft.as_deref().map(absolute),
        "decode": cfg,
        "horizon": a.horizon,
        "end": end,
    });
    dir.finish("decode", config, vec![a.seed], None)?;

    println!("forecast: {}", forecast_path.display());
    println!("rounds:   {}", trace.rounds.len());
    if let (Some(alpha), Some(l)) = (trace.empirical_acceptance(), trace.mean_outputs()) {
        println!("alpha_hat (per proposal): {alpha:.4}");
        println!("mean L: {l:.4}");
    }
    println!("wall time: {:.3} ms", trace.wall_times.total * 1e3);
    Ok(Outcome::Passed)
}

fn flagged(rows: &[CalibrationRow]) -> Outcome {
    if rows.iter().any(|r| r.flagged) {
        Outcome::Failed
    } else {
        Outcome::Passed
    }
}

pub fn scan(out: &Path, a: &ScanArgs) -> Result<Outcome> {
    if !a.spec.exists() {
        return Err(CliError::io(&a.spec, "no such file"));
    }
    let mut spec = ExperimentSpec::load(&a.spec)?;
    let axes = &mut spec.sweep;
    if !a.sigma.is_empty() {
        // the fitted scale stays on the axis so the MSE baseline exists
        axes.sigmas = std::iter::once(None).chain(a.sigma.iter().copied().map(Some)).collect();
    }
    if !a.gamma.is_empty() {
        axes.gammas = a.gamma.clone();
    }
    if !a.scale.is_empty() {
        axes.draft_scales = a.scale.clone();
    }
    if !a.bias.is_empty() {
        axes.biases = a.bias.clone();
    }
    if !a.tolerance_lambda.is_empty() {
        axes.tolerance_lambdas = a.tolerance_lambda.clone();
    }
    if !a.variant.is_empty() {
        axes.variants = a.variant.clone();
    }
    if !a.seed.is_empty() {
        spec.seeds = a.seed.clone();
    }
    spec.validate()?;

    let results = run_experiment(&spec)?;
    let rows = calibration_rows(&results);
    let mut dir = OutputDir::create(out)?;
    let jsonl: String = results.iter().map(json_line).collect();
    let results_path = dir.write("results.jsonl", jsonl.as_bytes())?;
    let cal = calibration_text(&rows);
    dir.write("calibration.txt", cal.as_bytes())?;
    let mut text = cal;
    if results.iter().any(|r| r.point.variant == patchspec::Variant::TargetOnly) {
        let trade = tradeoff_text(&tradeoff_table(&results)?);
        dir.write("tradeoff.txt", trade.as_bytes())?;
        text = format!("{text}\n{trade}");
    }
    let seeds = spec.seeds.clone();
    let config = serde_json::to_value(&spec).expect("spec serializes");
    dir.finish("scan", config, seeds, Some(determinism_digest(&results)))?;

    println!("{text}");
    println!("results: {}", results_path.display());
    Ok(if a.strict { flagged(&rows) } else { Outcome::Passed })
}

pub fn calibrate(out: &Path, a: &CalibrateArgs) -> Result<Outcome> {
    let text = std::fs::read_to_string(&a.results).map_err(|e| CliError::io(&a.results, e))?;
    let results = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str::<RunResult>(l).map_err(|e| CliError::io(&a.results, format!("line {}: {e}", i + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = calibration_rows(&results);
    let mut dir = OutputDir::create(out)?;
    let table = calibration_text(&rows);
    dir.write("calibration.txt", table.as_bytes())?;
    dir.write("calibration.jsonl", rows.iter().map(json_line).collect::<String>().as_bytes())?;
    let seeds = results.iter().map(|r| r.point.seed).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    dir.finish("calibrate", json!({ "results": absolute(&a.results), "strict": a.strict }), seeds, None)?;
    println!("{table}");
    Ok(if a.strict { flagged(&rows) } else { Outcome::Passed })
}

pub fn validate(out: &Path, a: &ValidateArgs) -> Result<Outcome> {
    let suites: Vec<Suite> = if a.suite.is_empty() { Suite::ALL.to_vec() } else { a.suite.clone() };
    let report = run_suites(&suites, a.seed)?;
    let mut dir = OutputDir::create(out)?;
    dir.write("validation.json", (serde_json::to_string_pretty(&report).expect("json") + "\n").as_bytes())?;
    let names: Vec<&str> = suites.iter().map(|s| s.as_str()).collect();
    dir.finish("validate", json!({ "suites": names }), vec![a.seed], None)?;
    print!("{}", report.to_text());
    Ok(if report.passed() { Outcome::Passed } else { Outcome::Failed })
}

pub fn predict(out: &Path, a: &PredictArgs) -> Result<Outcome> {
    let summary = PredictorSummary::compute(a.alpha, a.gamma, a.c, a.c_hat.unwrap_or(a.c), a.gamma_max)?;
    let mut dir = OutputDir::create(out)?;
    let text = serde_json::to_string_pretty(&summary).expect("json") + "\n";
    dir.write("predict.json", text.as_bytes())?;
    dir.finish("predict", serde_json::to_value(summary).expect("json"), vec![], None)?;
    if a.json {
        print!("{text}");
    } else {
        print!("{}", summary.to_text());
    }
    Ok(Outcome::Passed)
}
