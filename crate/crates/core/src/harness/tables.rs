use serde::{Deserialize, Serialize};

use super::run::RunResult;
use super::{HarnessError, Result};
use crate::analysis::render_table;
use crate::engine::Variant;

/// Relative prediction gap above which a calibration row is flagged.
pub const CALIBRATION_GAP: f64 = 0.25;

/// Held-out acceptance at and above which a sigma counts as saturated.
pub const SATURATION_ALPHA: f64 = 0.95;

/// Predicted against measured block length and speedup for one speculative run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub label: String,
    pub alpha_hat: f64,
    pub alpha_empirical: Option<f64>,
    pub e_l_pred: f64,
    pub l_mean: Option<f64>,
    pub n_mean: Option<f64>,
    pub s_wall_pred: f64,
    pub s_wall_meas: Option<f64>,
    pub gap_e_l: Option<f64>,
    pub gap_s_wall: Option<f64>,
    pub flagged: bool,
}

pub fn calibrate(results: &[RunResult]) -> Vec<CalibrationRow> {
    results
        .iter()
        .filter_map(|r| {
            let rep = r.report.as_ref()?;
            let flagged = rep.max_relative_gap().is_some_and(|g| g > CALIBRATION_GAP);
            Some(CalibrationRow {
                label: r.point.label(),
                alpha_hat: rep.alpha_bar,
                alpha_empirical: r.alpha_hat_empirical,
                e_l_pred: rep.e_l_pred,
                l_mean: rep.e_l_meas,
                n_mean: rep.n_mean_meas,
                s_wall_pred: rep.s_wall_pred,
                s_wall_meas: rep.s_wall_meas,
                gap_e_l: rep.deltas.e_l,
                gap_s_wall: rep.deltas.s_wall,
                flagged,
            })
        })
        .collect()
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or("-".to_string(), |x| format!("{x:.prec$}"))
}

fn pct(v: Option<f64>) -> String {
    v.map_or("-".to_string(), |x| format!("{:+.1}%", 100.0 * x))
}

pub fn calibration_text(rows: &[CalibrationRow]) -> String {
    let header = [
        "point", "alpha_hat", "alpha_emp", "E[L] pred", "L mean", "n mean", "S pred", "S meas", "gap E[L]", "gap S", "flag",
    ];
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.label.clone(),
                format!("{:.4}", r.alpha_hat),
                opt(r.alpha_empirical, 4),
                format!("{:.3}", r.e_l_pred),
                opt(r.l_mean, 3),
                opt(r.n_mean, 3),
                format!("{:.3}", r.s_wall_pred),
                opt(r.s_wall_meas, 3),
                pct(r.gap_e_l),
                pct(r.gap_s_wall),
                if r.flagged { "GAP".into() } else { String::new() },
            ]
        })
        .collect();
    render_table(&header, &body)
}

/// Accuracy against speed for one run, relative to the target-only baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub label: String,
    pub variant: Variant,
    pub sigma_used: f64,
    pub mse: f64,
    pub mae: f64,
    /// Percent change in MSE against target-only decoding at the fitted sigma.
    pub delta_mse_pct: f64,
    pub alpha_hat: Option<f64>,
    pub s_wall_pred: Option<f64>,
    pub s_wall_meas: f64,
}

/// One row per result, sorted by measured speedup, fastest first. The MSE
/// baseline is the target-only run at the fitted sigma with the same seed.
pub fn tradeoff_table(results: &[RunResult]) -> Result<Vec<TradeoffRow>> {
    let mut rows = results
        .iter()
        .map(|r| {
            let base = results
                .iter()
                .find(|b| b.point.variant == Variant::TargetOnly && b.point.sigma.is_none() && b.point.seed == r.point.seed)
                .ok_or(HarnessError::MissingBaseline)?;
            Ok(TradeoffRow {
                label: r.point.label(),
                variant: r.point.variant,
                sigma_used: r.sigma_used,
                mse: r.mse,
                mae: r.mae,
                delta_mse_pct: 100.0 * (r.mse - base.mse) / base.mse,
                alpha_hat: r.report.as_ref().map(|rep| rep.alpha_bar),
                s_wall_pred: r.report.as_ref().map(|rep| rep.s_wall_pred),
                s_wall_meas: r.s_wall_measured,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| b.s_wall_meas.total_cmp(&a.s_wall_meas));
    Ok(rows)
}

pub fn tradeoff_text(rows: &[TradeoffRow]) -> String {
    let header = ["point", "sigma", "MSE", "MAE", "dMSE", "alpha_hat", "S pred", "S meas"];
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.label.clone(),
                format!("{:.4}", r.sigma_used),
                format!("{:.4}", r.mse),
                format!("{:.4}", r.mae),
                format!("{:+.1}%", r.delta_mse_pct),
                opt(r.alpha_hat, 4),
                opt(r.s_wall_pred, 3),
                format!("{:.3}", r.s_wall_meas),
            ]
        })
        .collect();
    render_table(&header, &body)
}

/// Smallest sigma among speculative runs whose held-out acceptance reaches
/// [`SATURATION_ALPHA`]; `None` when no run gets there.
pub fn saturation_point(results: &[RunResult]) -> Option<f64> {
    results
        .iter()
        .filter(|r| r.point.variant.is_speculative())
        .filter(|r| r.report.as_ref().is_some_and(|rep| rep.alpha_bar >= SATURATION_ALPHA))
        .map(|r| r.sigma_used)
        .reduce(f64::min)
}
