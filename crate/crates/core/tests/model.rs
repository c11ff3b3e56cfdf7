use std::path::PathBuf;

use patchspec::model::synthetic::{ar1, seasonal_ar, SeasonalArConfig};
use patchspec::model::{fit_linear_ar, load_csv, metrics, write_csv, CsvSchema, HeadOverrides, NormStats, PatchSeries, RawSeries};
use patchspec::stats::median;
use patchspec::{ForecastModel, History};
use proptest::prelude::*;

fn data_file(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

/// One-step held-out MSE of `model` over every test patch of every channel.
fn heldout_mse(model: &ForecastModel, series: &PatchSeries, from: usize) -> f64 {
    let k = model.lookback_patches();
    let (mut preds, mut truth) = (Vec::new(), Vec::new());
    for ch in &series.patches {
        for t in from..ch.len() {
            let h = History::from_patches(k, model.mean_patch().to_vec(), &ch[t - k..t]).unwrap();
            preds.push(model.point_forecast(&h, &[]).unwrap());
            truth.push(ch[t].clone());
        }
    }
    metrics(&preds, &truth).unwrap().mse
}

fn split(raw: &RawSeries, patch_len: usize, train_frac: f64) -> (PatchSeries, PatchSeries, usize) {
    let n = raw.len() / patch_len;
    let cut = (train_frac * n as f64) as usize;
    let train_raw = raw.slice(0, cut * patch_len);
    let stats = NormStats::fit(&train_raw);
    (PatchSeries::new(&train_raw, patch_len, Some(&stats)).unwrap(), PatchSeries::new(raw, patch_len, Some(&stats)).unwrap(), cut)
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn standardization_round_trips(
        values in prop::collection::vec(prop::collection::vec(-1e4..1e4f64, 16), 1..4),
    ) {
        let names = (0..values.len()).map(|i| format!("c{i}")).collect();
        let raw = RawSeries::new(names, values.clone());
        let stats = NormStats::fit(&raw);
        for (c, col) in values.iter().enumerate() {
            for v in col {
                let back = stats.destandardize(c, stats.standardize(c, *v));
                prop_assert!((back - v).abs() <= 1e-9 * v.abs().max(1.0));
            }
        }
    }

    #[test]
    fn history_evicts_oldest_first(k in 1usize..10, extra in 1usize..10) {
        let mut h = History::new(k, vec![0.0]).unwrap();
        let total = k + extra;
        for i in 0..total {
            h.push(vec![i as f64]).unwrap();
        }
        let contents: Vec<f64> = h.iter().map(|p| p[0]).collect();
        let expected: Vec<f64> = (extra..total).map(|i| i as f64).collect();
        prop_assert_eq!(contents, expected);
        prop_assert_eq!(h.total_emitted(), total as u64);
    }
}

fn median_heldout(make: impl Fn(u64) -> RawSeries) -> (f64, f64) {
    let mut full = Vec::new();
    let mut truncated = Vec::new();
    for seed in 0..20 {
        let raw = make(seed);
        let (train, all, cut) = split(&raw, 4, 0.7);
        let big = fit_linear_ar(&train, 8, 1e-3, 1.0).unwrap();
        let small = fit_linear_ar(&train, 8, 1e-3, 0.25).unwrap();
        full.push(heldout_mse(&big, &all, cut));
        truncated.push(heldout_mse(&small, &all, cut));
    }
    (median(&full), median(&truncated))
}

#[test]
fn full_capacity_beats_truncated_draft_on_seasonal_data() {
    // lag 24 lies inside 8 patches of 4 but outside the truncated 2
    let (f, t) = median_heldout(|seed| seasonal_ar(&SeasonalArConfig { len: 6000, channels: 1, seed, ..Default::default() }));
    assert!(f <= t, "full {f} truncated {t}");
}

#[test]
fn truncation_costs_nothing_on_markov_data() {
    // AR(1) needs only the last value, so both fits tie up to estimation noise
    let (f, t) = median_heldout(|seed| ar1(6000, 1, 0.8, seed));
    assert!((f - t).abs() / t <= 0.05, "full {f} truncated {t}");
}

#[test]
fn predictions_are_bit_identical_across_calls() {
    let raw = seasonal_ar(&SeasonalArConfig { len: 3000, seed: 2, ..Default::default() });
    let series = PatchSeries::new(&raw, 8, None).unwrap();
    let m = fit_linear_ar(&series, 4, 0.1, 1.0).unwrap();
    let h = History::from_patches(4, m.mean_patch().to_vec(), &series.patches[1][10..14]).unwrap();
    let ov = HeadOverrides { sigma: Some(0.4), bias: Some(0.1) };
    let a = m.predict(&h, &ov).unwrap();
    let b = m.predict(&h, &ov).unwrap();
    assert_eq!(a.mean().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.mean().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(a, b);
}

#[test]
fn bundled_exact_seasonal_csv_fits_exactly() {
    let raw = load_csv(data_file("seasonal_exact.csv"), &CsvSchema::ett()).unwrap();
    assert_eq!(raw.n_channels(), 3);
    let (train, _, _) = split(&raw, 16, 0.7);
    let m = fit_linear_ar(&train, 8, 1e-6, 1.0).unwrap();
    assert!(m.residual_std() <= 1e-5, "residual std {}", m.residual_std());
}

#[test]
fn csv_and_model_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let raw = seasonal_ar(&SeasonalArConfig { len: 800, channels: 2, seed: 4, ..Default::default() });
    let csv = dir.path().join("series.csv");
    write_csv(&raw, &csv).unwrap();
    let back = load_csv(&csv, &CsvSchema::ett()).unwrap();
    assert_eq!(back.values, raw.values);

    let series = PatchSeries::new(&raw, 8, None).unwrap();
    let m = fit_linear_ar(&series, 4, 0.5, 0.5).unwrap().with_seed(9);
    let path = dir.path().join("m.json");
    m.save(&path).unwrap();
    let loaded = ForecastModel::load(&path).unwrap();
    assert_eq!(loaded, m);
    assert_eq!(loaded.to_json(), m.to_json());
}

#[test]
fn missing_csv_names_the_path() {
    let err = load_csv("/nonexistent/where.csv", &CsvSchema::ett()).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/where.csv"));
}
