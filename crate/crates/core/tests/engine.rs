use std::sync::OnceLock;

use patchspec::engine::{decode, DecodeConfig, FinalDrawSource, Variant};
use patchspec::model::synthetic::{seasonal_ar, SeasonalArConfig};
use patchspec::model::{fit_linear_ar, PatchSeries};
use patchspec::{ForecastModel, History};
use proptest::prelude::*;

struct Fixture {
    target: ForecastModel,
    draft: ForecastModel,
    h0: History,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let raw = seasonal_ar(&SeasonalArConfig { len: 4000, channels: 2, seed: 5, ..Default::default() });
        let series = PatchSeries::new(&raw, 8, None).unwrap();
        let target = fit_linear_ar(&series, 6, 1.0, 1.0).unwrap();
        let draft = fit_linear_ar(&series, 6, 1.0, 0.25).unwrap();
        let ch = &series.patches[0];
        let h0 = History::from_patches(6, target.mean_patch().to_vec(), &ch[ch.len() - 6..]).unwrap();
        Fixture { target, draft, h0 }
    })
}

fn config(variant: Variant, gamma: usize, horizon: usize, seed: u64, sigma: Option<f64>) -> DecodeConfig {
    DecodeConfig {
        gamma,
        variant,
        horizon_patches: horizon,
        seed,
        sigma_target: sigma,
        sigma_draft: sigma,
        ..Default::default()
    }
}

fn speculative() -> impl Strategy<Value = Variant> {
    prop_oneof![Just(Variant::Practical), Just(Variant::Lossless)]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn rounds_have_prefix_structure_and_capped_length(
        variant in speculative(),
        gamma in 1usize..7,
        horizon in 1usize..30,
        seed in any::<u64>(),
        sigma in 0.3..1.5f64,
    ) {
        let f = fixture();
        let (out, trace) = decode(&f.target, &f.draft, &f.h0, &config(variant, gamma, horizon, seed, Some(sigma))).unwrap();
        prop_assert_eq!(out.len(), horizon);
        for r in &trace.rounds {
            let n = r.run_length;
            prop_assert!(r.proposals.len() == n || r.proposals.len() == n + 1);
            prop_assert!(r.proposals[..n].iter().all(|p| p.accepted));
            if r.proposals.len() == n + 1 {
                prop_assert!(!r.proposals[n].accepted);
            } else {
                prop_assert_eq!(n, gamma);
                prop_assert_eq!(r.final_draw_source, FinalDrawSource::TargetNext);
            }
            prop_assert_eq!(r.outputs_emitted, n + 1);
            prop_assert!((1..=gamma + 1).contains(&r.outputs_emitted));
        }
        let rounds = trace.rounds.len() as u64;
        prop_assert_eq!(trace.totals.target_passes, rounds);
        prop_assert_eq!(trace.totals.target_forward_equivalents, rounds * (gamma as u64 + 1));
        prop_assert_eq!(trace.totals.draft_passes, rounds * gamma as u64);
        prop_assert_eq!(trace.totals.patches_kept, horizon as u64);
    }

    #[test]
    fn decoding_is_deterministic(variant in speculative(), gamma in 1usize..5, seed in any::<u64>()) {
        let f = fixture();
        let cfg = config(variant, gamma, 12, seed, Some(0.6));
        let (a, ta) = decode(&f.target, &f.draft, &f.h0, &cfg).unwrap();
        let (b, tb) = decode(&f.target, &f.draft, &f.h0, &cfg).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(ta.same_outcome(&tb));
    }

    #[test]
    fn self_speculation_variants_agree(gamma in 1usize..6, seed in any::<u64>(), horizon in 1usize..20) {
        let f = fixture();
        let (a, ta) = decode(&f.target, &f.target, &f.h0, &config(Variant::Practical, gamma, horizon, seed, None)).unwrap();
        let (b, _) = decode(&f.target, &f.target, &f.h0, &config(Variant::Lossless, gamma, horizon, seed, None)).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(ta.rounds.iter().all(|r| r.run_length == gamma));
    }

    #[test]
    fn truncation_leaves_earlier_rounds_alone(
        variant in speculative(),
        gamma in 1usize..5,
        seed in any::<u64>(),
        short in 1usize..15,
        extra in 1usize..15,
    ) {
        let f = fixture();
        let (a, ta) = decode(&f.target, &f.draft, &f.h0, &config(variant, gamma, short, seed, Some(0.7))).unwrap();
        let (b, tb) = decode(&f.target, &f.draft, &f.h0, &config(variant, gamma, short + extra, seed, Some(0.7))).unwrap();
        prop_assert_eq!(&a[..], &b[..short]);
        let last = ta.rounds.len() - 1;
        for (x, y) in ta.rounds[..last].iter().zip(&tb.rounds) {
            prop_assert_eq!(x, y);
        }
        // the truncated round drew the same patches, it only kept fewer
        prop_assert_eq!(&ta.rounds[last].proposals, &tb.rounds[last].proposals);
    }
}

#[test]
fn target_only_emits_one_patch_per_round() {
    let f = fixture();
    let (out, trace) = decode(&f.target, &f.draft, &f.h0, &config(Variant::TargetOnly, 3, 10, 1, None)).unwrap();
    assert_eq!(out.len(), 10);
    assert_eq!(trace.rounds.len(), 10);
    assert!(trace.rounds.iter().all(|r| r.outputs_emitted == 1 && r.proposals.is_empty()));
}

#[test]
fn mismatched_dims_are_rejected() {
    let f = fixture();
    let other = ForecastModel::synthetic_oracle(vec![0.0; 3], 1.0).unwrap();
    assert!(decode(&f.target, &other, &f.h0, &config(Variant::Practical, 3, 4, 0, None)).is_err());
}
