use patchspec::analysis::{estimate_alpha, AcceptanceEstimate, EstimateMode};
use patchspec::engine::{decode, DecodeConfig, Variant};
use patchspec::harness::{
    calibrate, determinism_digest, prepare, run_experiment, tradeoff_table, CostSpec, DatasetSpec, ExperimentSpec,
    RunResult, SweepAxes, SweepPoint,
};
use patchspec::model::synthetic::{seasonal_ar, SeasonalArConfig};
use patchspec::model::{write_csv, CsvSchema};
use patchspec::prob::GaussianHead;
use patchspec::stats::spearman;
use patchspec::{ForecastModel, History};

fn small_spec(sweep: SweepAxes) -> ExperimentSpec {
    ExperimentSpec {
        dataset: DatasetSpec::Synthetic(SeasonalArConfig { len: 6000, channels: 2, period: 12, seed: 3, ..Default::default() }),
        patch_len: 4,
        lookback_patches: 8,
        ridge: 1.0,
        horizon: 24,
        heldout_histories: 64,
        test_windows: 8,
        timing_repeats: 1,
        cost: CostSpec::Configured { c: 0.25, c_hat: 0.25 },
        sweep,
        ..Default::default()
    }
}

#[test]
fn splits_are_chronological() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("series.csv");
    let raw = seasonal_ar(&SeasonalArConfig { len: 3000, channels: 2, seed: 1, ..Default::default() });
    write_csv(&raw, &csv).unwrap();
    let spec = ExperimentSpec {
        dataset: DatasetSpec::Csv { path: csv, schema: CsvSchema::ett() },
        ..small_spec(SweepAxes::default())
    };
    let data = prepare(&spec).unwrap();
    let ts = data.raw.timestamps.as_ref().expect("timestamps read");
    let [train, val, test] = data.bounds.timestep_ranges();
    assert!(!train.is_empty() && !val.is_empty() && !test.is_empty());
    let max_train = ts[train].iter().max().unwrap();
    let min_val = ts[val.clone()].iter().min().unwrap();
    let max_val = ts[val].iter().max().unwrap();
    let min_test = ts[test].iter().min().unwrap();
    assert!(max_train < min_val && max_val < min_test);
}

#[test]
fn baseline_speedup_is_exactly_one_and_runs_reproduce() {
    let sweep = SweepAxes {
        sigmas: vec![None, Some(0.8)],
        variants: vec![Variant::TargetOnly, Variant::Practical, Variant::Lossless],
        ..SweepAxes::default()
    };
    let spec = small_spec(sweep);
    let a = run_experiment(&spec).unwrap();
    let b = run_experiment(&spec).unwrap();
    for r in a.iter().filter(|r| r.point.variant == Variant::TargetOnly) {
        assert_eq!(r.s_wall_measured, 1.0);
    }
    assert_eq!(determinism_digest(&a), determinism_digest(&b));
    let strip = |rs: &[RunResult]| rs.iter().map(RunResult::without_timing).collect::<Vec<_>>();
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn self_speculation_calibrates_exactly() {
    let sweep = SweepAxes {
        variants: vec![Variant::TargetOnly, Variant::Practical],
        draft_scales: vec![1.0],
        gammas: vec![3],
        ..SweepAxes::default()
    };
    let results = run_experiment(&small_spec(sweep)).unwrap();
    let rows = calibrate(&results);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].alpha_hat, 1.0);
    assert_eq!(rows[0].e_l_pred, 4.0);
    assert_eq!(rows[0].l_mean, Some(4.0));
    assert_eq!(rows[0].gap_e_l, Some(0.0));
}

#[test]
fn heldout_acceptance_rises_with_sigma() {
    let sigmas = [0.3, 0.45, 0.6, 0.8, 1.0];
    let sweep = SweepAxes {
        sigmas: sigmas.iter().copied().map(Some).collect(),
        variants: vec![Variant::Practical],
        ..SweepAxes::default()
    };
    let results = run_experiment(&small_spec(sweep)).unwrap();
    let alphas: Vec<f64> = results.iter().map(|r| r.alpha_hat_heldout.unwrap().alpha_bar_hat).collect();
    let used: Vec<f64> = results.iter().map(|r| r.sigma_used).collect();
    assert!(spearman(&used, &alphas) > 0.0, "alphas {alphas:?}");
}

fn stored(variant: Variant, mse: f64) -> RunResult {
    RunResult {
        dataset: "ETTh1".into(),
        point: SweepPoint {
            variant,
            sigma: None,
            gamma: variant.is_speculative().then_some(3),
            draft_scale: variant.is_speculative().then_some(0.25),
            bias: None,
            tolerance_lambda: None,
            seed: 0,
        },
        sigma_used: 0.35,
        mse,
        mae: 0.0,
        alpha_hat_empirical: None,
        alpha_hat_heldout: None,
        mean_n: None,
        mean_l: None,
        rounds: 0,
        target_param_count: 1,
        draft_param_count: None,
        mean_residual_draws: None,
        report: None,
        c_measured: None,
        cost: None,
        s_wall_measured: 1.0,
        run_seconds: 0.0,
        baseline_seconds: 0.0,
    }
}

#[test]
fn delta_mse_is_computed_from_stored_fields() {
    let rows = tradeoff_table(&[stored(Variant::TargetOnly, 0.4746), stored(Variant::Practical, 0.5014)]).unwrap();
    let sd = rows.iter().find(|r| r.variant == Variant::Practical).unwrap();
    assert!((sd.delta_mse_pct - 5.6).abs() < 0.05, "{}", sd.delta_mse_pct);
    assert!(tradeoff_table(&[stored(Variant::Practical, 0.5)]).is_err());
    let same = tradeoff_table(&[stored(Variant::TargetOnly, 0.4746), stored(Variant::Practical, 0.4746)]).unwrap();
    assert!(same.iter().all(|r| r.delta_mse_pct == 0.0));
}

#[test]
fn empirical_acceptance_lies_in_the_hoeffding_interval() {
    let p = GaussianHead::isotropic(vec![0.0], 1.0).unwrap();
    let q = GaussianHead::isotropic(vec![0.5], 1.0).unwrap();
    let truth = estimate_alpha(&[(p, q)], EstimateMode::ClosedForm).unwrap().alpha_bar_hat;
    let target = ForecastModel::synthetic_oracle(vec![0.0], 1.0).unwrap();
    let draft = ForecastModel::synthetic_oracle(vec![0.5], 1.0).unwrap();
    let h0 = History::new(1, vec![0.0]).unwrap();
    for seed in 0..5 {
        let cfg = DecodeConfig { gamma: 4, horizon_patches: 20_000, seed, ..Default::default() };
        let (_, trace) = decode(&target, &draft, &h0, &cfg).unwrap();
        let n = trace.proposals_total();
        let radius = AcceptanceEstimate { alpha_bar_hat: truth, n_histories: n, mc_per_history: None }
            .hoeffding_radius(0.01)
            .unwrap();
        let emp = trace.empirical_acceptance().unwrap();
        assert!((emp - truth).abs() <= radius, "seed {seed}: {emp} vs {truth} +- {radius}");
    }
}
