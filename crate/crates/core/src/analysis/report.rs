use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::laws::{expected_block_length, lossless_worthwhile, ops_factor, select_gamma, speedup_wall};
use super::{check_positive, AnalysisError, Result};
use crate::engine::DecodeTrace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostSource {
    Measured { draft_samples: usize, target_samples: usize },
    Configured,
}

/// Draft/target cost ratios: wall-clock `c` and FLOPs `c_hat`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub c: f64,
    pub c_hat: f64,
    pub source: CostSource,
}

impl CostModel {
    pub fn configured(c: f64, c_hat: f64) -> Result<Self> {
        check_positive("c", c)?;
        check_positive("c_hat", c_hat)?;
        Ok(Self { c, c_hat, source: CostSource::Configured })
    }

    pub fn measured(c: f64, c_hat: f64, draft_samples: usize, target_samples: usize) -> Result<Self> {
        check_positive("c", c)?;
        check_positive("c_hat", c_hat)?;
        Ok(Self { c, c_hat, source: CostSource::Measured { draft_samples, target_samples } })
    }
}

/// Relative gaps `(meas - pred) / pred`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportDeltas {
    pub e_l: Option<f64>,
    pub s_wall: Option<f64>,
    pub ops_factor: Option<f64>,
}

/// Predicted and measured block length, speedup and compute factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorReport {
    pub gamma: usize,
    pub alpha_bar: f64,
    pub cost: CostModel,
    pub e_l_pred: f64,
    pub s_wall_pred: f64,
    pub ops_factor_pred: f64,
    /// Mean outputs per round, `L = n + 1`.
    pub e_l_meas: Option<f64>,
    /// Mean accepted proposals per round, `n`.
    pub n_mean_meas: Option<f64>,
    /// Standard error of `e_l_meas`.
    pub e_l_meas_se: Option<f64>,
    pub s_wall_meas: Option<f64>,
    pub ops_factor_meas: Option<f64>,
    pub deltas: ReportDeltas,
}

fn rel(meas: Option<f64>, pred: f64) -> Option<f64> {
    meas.map(|m| if pred == 0.0 { f64::INFINITY } else { (m - pred) / pred })
}

impl PredictorReport {
    pub fn predict(alpha_bar: f64, gamma: usize, cost: CostModel) -> Result<Self> {
        Ok(Self {
            gamma,
            alpha_bar,
            cost,
            e_l_pred: expected_block_length(alpha_bar, gamma)?,
            s_wall_pred: speedup_wall(alpha_bar, gamma, cost.c)?,
            ops_factor_pred: ops_factor(alpha_bar, gamma, cost.c_hat)?,
            e_l_meas: None,
            n_mean_meas: None,
            e_l_meas_se: None,
            s_wall_meas: None,
            ops_factor_meas: None,
            deltas: ReportDeltas::default(),
        })
    }

    /// Fills the measured fields from a speculative trace. Block lengths use
    /// the untruncated `L` of each round; the compute factor counts
    /// `target equivalents + c_hat * draft passes` per emitted patch.
    pub fn with_trace(mut self, trace: &DecodeTrace, s_wall_meas: Option<f64>) -> Result<Self> {
        if trace.rounds.is_empty() {
            return Err(AnalysisError::Empty);
        }
        let ls: Vec<f64> = trace.rounds.iter().map(|r| r.outputs_emitted as f64).collect();
        let (mean, se) = crate::stats::mean_and_se(&ls);
        self.e_l_meas = Some(mean);
        self.e_l_meas_se = Some(se);
        self.n_mean_meas = trace.mean_run_length();
        let t = &trace.totals;
        if t.patches_emitted > 0 {
            let work = t.target_forward_equivalents as f64 + self.cost.c_hat * t.draft_passes as f64;
            self.ops_factor_meas = Some(work / t.patches_emitted as f64);
        }
        self.s_wall_meas = s_wall_meas;
        self.refresh_deltas();
        Ok(self)
    }

    pub fn refresh_deltas(&mut self) {
        self.deltas = ReportDeltas {
            e_l: rel(self.e_l_meas, self.e_l_pred),
            s_wall: rel(self.s_wall_meas, self.s_wall_pred),
            ops_factor: rel(self.ops_factor_meas, self.ops_factor_pred),
        };
    }

    /// Largest absolute relative gap among the measured fields.
    pub fn max_relative_gap(&self) -> Option<f64> {
        [self.deltas.e_l, self.deltas.s_wall].iter().flatten().map(|d| d.abs()).reduce(f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    /// Aligned plain-text table, one row per report.
    pub fn table(reports: &[PredictorReport]) -> String {
        let opt = |v: Option<f64>, prec: usize| v.map_or("-".to_string(), |x| format!("{x:.prec$}"));
        let pct = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:+.1}%", 100.0 * x));
        let header = [
            "alpha", "gamma", "c", "E[L] pred", "L meas", "n meas", "S pred", "S meas", "Ops pred", "Ops meas", "dE[L]",
            "dS",
        ];
        let rows: Vec<Vec<String>> = reports
            .iter()
            .map(|r| {
                vec![
                    format!("{:.4}", r.alpha_bar),
                    r.gamma.to_string(),
                    format!("{:.3}", r.cost.c),
                    format!("{:.2}", r.e_l_pred),
                    opt(r.e_l_meas, 2),
                    opt(r.n_mean_meas, 2),
                    format!("{:.2}x", r.s_wall_pred),
                    r.s_wall_meas.map_or("-".into(), |s| format!("{s:.2}x")),
                    format!("{:.3}", r.ops_factor_pred),
                    opt(r.ops_factor_meas, 3),
                    pct(r.deltas.e_l),
                    pct(r.deltas.s_wall),
                ]
            })
            .collect();
        render_table(&header, &rows)
    }
}

pub(crate) fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |cells: &mut dyn Iterator<Item = &str>, out: &mut String| {
        let parts: Vec<String> = cells.zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut header.iter().copied(), &mut out);
    let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1)));
    for row in rows {
        line(&mut row.iter().map(String::as_str), &mut out);
    }
    out
}

/// Everything the closed-form laws say about one `(alpha_bar, gamma, c, c_hat)` point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorSummary {
    pub alpha_bar: f64,
    pub gamma: usize,
    pub c: f64,
    pub c_hat: f64,
    pub gamma_max: usize,
    pub expected_block_length: f64,
    pub speedup_wall: f64,
    pub ops_factor: f64,
    pub gamma_rule: usize,
    pub gamma_scan: usize,
    pub lossless_worthwhile: bool,
}

impl PredictorSummary {
    pub fn compute(alpha_bar: f64, gamma: usize, c: f64, c_hat: f64, gamma_max: usize) -> Result<Self> {
        if gamma == 0 {
            return Err(AnalysisError::Domain("gamma must be >= 1".into()));
        }
        let choice = select_gamma(alpha_bar, c, gamma_max)?;
        Ok(Self {
            alpha_bar,
            gamma,
            c,
            c_hat,
            gamma_max,
            expected_block_length: expected_block_length(alpha_bar, gamma)?,
            speedup_wall: speedup_wall(alpha_bar, gamma, c)?,
            ops_factor: ops_factor(alpha_bar, gamma, c_hat)?,
            gamma_rule: choice.gamma_rule,
            gamma_scan: choice.gamma_scan,
            lossless_worthwhile: lossless_worthwhile(alpha_bar, gamma)?,
        })
    }

    pub fn to_text(&self) -> String {
        let rows = vec![
            ("alpha_bar", format!("{}", self.alpha_bar)),
            ("gamma", self.gamma.to_string()),
            ("c", format!("{}", self.c)),
            ("c_hat", format!("{}", self.c_hat)),
            ("E[L]", format!("{:.4}", self.expected_block_length)),
            ("S_wall", format!("{:.4}", self.speedup_wall)),
            ("OpsFactor", format!("{:.4}", self.ops_factor)),
            ("gamma_rule", self.gamma_rule.to_string()),
            ("gamma_scan", format!("{} (gamma <= {})", self.gamma_scan, self.gamma_max)),
            ("lossless_worthwhile", self.lossless_worthwhile.to_string()),
        ];
        let w = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        rows.iter().map(|(k, v)| format!("{k:<w$}  {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predictions_are_pure_functions_of_inputs() {
        let cost = CostModel::configured(0.25, 0.25).unwrap();
        let r = PredictorReport::predict(1.0, 3, cost).unwrap();
        assert_eq!(r.e_l_pred, 4.0);
        assert!((r.s_wall_pred - 4.0 / 1.75).abs() < 1e-12);
        assert!((r.ops_factor_pred - 1.1875).abs() < 1e-12);
        assert!(r.e_l_meas.is_none() && r.max_relative_gap().is_none());
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let cost = CostModel::measured(0.123_456_789, 0.25, 100, 100).unwrap();
        let mut r = PredictorReport::predict(0.913_3, 5, cost).unwrap();
        r.e_l_meas = Some(3.123_456_789_012_3);
        r.s_wall_meas = Some(1.7);
        r.refresh_deltas();
        let back = PredictorReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn table_has_one_line_per_row() {
        let cost = CostModel::configured(0.3, 0.25).unwrap();
        let reports = vec![PredictorReport::predict(0.9, 3, cost).unwrap(), PredictorReport::predict(1.0, 3, cost).unwrap()];
        let t = PredictorReport::table(&reports);
        assert_eq!(t.lines().count(), 4);
        assert!(t.lines().next().unwrap().contains("E[L] pred"));
    }

    #[test]
    fn summary_fields() {
        let s = PredictorSummary::compute(0.9625, 3, 0.25, 0.25, 16).unwrap();
        assert!((s.expected_block_length - 3.780_6).abs() < 1e-4);
        assert!(!s.lossless_worthwhile);
        assert!(s.to_text().contains("gamma_scan"));
        assert!(CostModel::configured(0.0, 1.0).is_err());
        assert!(PredictorSummary::compute(0.5, 0, 0.2, 0.2, 4).is_err());
    }
}
