use std::time::Instant;

use rand::Rng;

use super::trace::{DecodeTrace, FinalDrawSource, ProposalRecord, RoundRecord};
use super::{DecodeConfig, EngineError, Result, Variant};
use crate::model::{ForecastModel, HeadOverrides, History, ModelError};
use crate::prob::{acceptance, residual_sample, GaussianHead, ProbError};
use crate::rng::{Purpose, RngStreams};

fn non_finite(round: usize) -> impl Fn(ModelError) -> EngineError {
    move |e| match e {
        ModelError::Prob(ProbError::InvalidParameter(m)) => EngineError::NonFinite { round, message: m },
        other => EngineError::Model(other),
    }
}

fn check_dims(target: &ForecastModel, draft: &ForecastModel, h0: &History) -> Result<()> {
    if target.dim() != draft.dim() {
        return Err(EngineError::DimensionMismatch { target: target.dim(), draft: draft.dim() });
    }
    if h0.dim() != target.dim() {
        return Err(EngineError::Model(ModelError::DimensionMismatch { expected: target.dim(), found: h0.dim() }));
    }
    Ok(())
}

/// Dispatches on `cfg.variant`. Baselines use `target` or `draft` alone.
pub fn decode(target: &ForecastModel, draft: &ForecastModel, h0: &History, cfg: &DecodeConfig) -> Result<(Vec<Vec<f64>>, DecodeTrace)> {
    match cfg.variant {
        Variant::Practical | Variant::Lossless => speculative(target, draft, h0, cfg),
        Variant::TargetOnly => decode_baseline(target, h0, cfg),
        Variant::DraftOnly => decode_baseline(draft, h0, cfg),
    }
}

/// Speculative decoding with fallback-to-target on rejection.
pub fn decode_practical(target: &ForecastModel, draft: &ForecastModel, h0: &History, cfg: &DecodeConfig) -> Result<(Vec<Vec<f64>>, DecodeTrace)> {
    if cfg.variant != Variant::Practical {
        return Err(EngineError::InvalidConfig(format!("decode_practical called with variant {}", cfg.variant.as_str())));
    }
    speculative(target, draft, h0, cfg)
}

/// Speculative decoding with residual sampling on rejection.
pub fn decode_lossless(target: &ForecastModel, draft: &ForecastModel, h0: &History, cfg: &DecodeConfig) -> Result<(Vec<Vec<f64>>, DecodeTrace)> {
    if cfg.variant != Variant::Lossless {
        return Err(EngineError::InvalidConfig(format!("decode_lossless called with variant {}", cfg.variant.as_str())));
    }
    speculative(target, draft, h0, cfg)
}

fn speculative(target: &ForecastModel, draft: &ForecastModel, h0: &History, cfg: &DecodeConfig) -> Result<(Vec<Vec<f64>>, DecodeTrace)> {
    cfg.validate()?;
    check_dims(target, draft, h0)?;
    let rule = cfg.rule()?;
    let (ov_target, ov_draft) = cfg.overrides(target, draft);
    let streams = RngStreams::new(cfg.seed);
    let gamma = cfg.gamma;
    let context_len = target.lookback_patches().max(draft.lookback_patches());
    let dim = target.dim();
    let started = Instant::now();

    let mut history = h0.clone();
    let mut forecast: Vec<Vec<f64>> = Vec::with_capacity(cfg.horizon_patches);
    let mut trace = DecodeTrace::default();
    let mut round = 0usize;

    while forecast.len() < cfg.horizon_patches {
        let wrap = non_finite(round);
        let r = round as u64;

        // draft proposes gamma patches autoregressively on a flat context
        // that the target then reads its gamma + 1 windows from
        let t0 = Instant::now();
        let mut ctx = history.window(context_len);
        ctx.reserve(gamma * dim);
        let mut proposals: Vec<Vec<f64>> = Vec::with_capacity(gamma + 1);
        let mut q_heads: Vec<GaussianHead> = Vec::with_capacity(gamma);
        for i in 0..gamma {
            let q = draft.predict_context(&ctx, &ov_draft).map_err(&wrap)?;
            let x = q.sample(&mut streams.stream(r, i as u64, Purpose::DraftProposal));
            ctx.extend_from_slice(&x);
            proposals.push(x);
            q_heads.push(q);
        }
        trace.wall_times.draft_total += t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        let p_heads = target.predict_context_batch(&ctx, gamma + 1, &ov_target).map_err(&wrap)?;
        trace.wall_times.target_total += t1.elapsed().as_secs_f64();

        let mut records = Vec::with_capacity(gamma);
        let mut n = 0usize;
        for i in 0..gamma {
            let u: f64 = streams.stream(r, i as u64, Purpose::AcceptUniform).random();
            let x = &proposals[i];
            let d = acceptance(&p_heads[i], &q_heads[i], x, &rule, u)?;
            let log_q = q_heads[i].log_density(x)?;
            records.push(ProposalRecord {
                x: x.clone(),
                log_q,
                log_p: log_q + d.log_ratio,
                alpha: d.alpha,
                accepted: d.accepted,
            });
            if !d.accepted {
                break;
            }
            n += 1;
        }

        let mut residual_draws = 0usize;
        let mut degraded = false;
        let (last, source) = if n == gamma {
            let t = p_heads[gamma].sample(&mut streams.stream(r, gamma as u64, Purpose::FinalDraw));
            (t, FinalDrawSource::TargetNext)
        } else if cfg.variant == Variant::Lossless {
            let mut rng = streams.stream(r, n as u64, Purpose::Residual);
            match residual_sample(&p_heads[n], &q_heads[n], &mut rng) {
                Ok(draw) => {
                    residual_draws = draw.target_draws;
                    (draw.sample, FinalDrawSource::Residual)
                }
                Err(ProbError::ResidualUndefined { beta }) => {
                    log::warn!("round {round}: residual undefined (overlap {beta}); falling back to a target draw");
                    degraded = true;
                    let t = p_heads[n].sample(&mut streams.stream(r, n as u64, Purpose::FinalDraw));
                    (t, FinalDrawSource::TargetFallback)
                }
                Err(e) => return Err(e.into()),
            }
        } else {
            let t = p_heads[n].sample(&mut streams.stream(r, n as u64, Purpose::FinalDraw));
            (t, FinalDrawSource::TargetFallback)
        };

        proposals.truncate(n);
        proposals.push(last);
        let emitted = proposals.len();
        let keep = emitted.min(cfg.horizon_patches - forecast.len());
        for patch in proposals.into_iter().take(keep) {
            history.push(patch.clone())?;
            forecast.push(patch);
        }

        trace.totals.target_passes += 1;
        trace.totals.target_forward_equivalents += gamma as u64 + 1;
        trace.totals.draft_passes += gamma as u64;
        trace.totals.patches_emitted += emitted as u64;
        trace.totals.patches_kept += keep as u64;
        trace.rounds.push(RoundRecord {
            round,
            proposals: records,
            run_length: n,
            final_draw_source: source,
            outputs_emitted: emitted,
            outputs_kept: keep,
            residual_target_draws: residual_draws,
            residual_degraded: degraded,
        });
        round += 1;
    }
    trace.wall_times.total = started.elapsed().as_secs_f64();
    Ok((forecast, trace))
}

/// Plain autoregressive sampling from one model, one pass per patch.
pub fn decode_baseline(model: &ForecastModel, h0: &History, cfg: &DecodeConfig) -> Result<(Vec<Vec<f64>>, DecodeTrace)> {
    cfg.validate()?;
    check_dims(model, model, h0)?;
    let overrides = match cfg.variant {
        Variant::TargetOnly => HeadOverrides { sigma: cfg.sigma_target, bias: Some(0.0) },
        Variant::DraftOnly => HeadOverrides { sigma: cfg.sigma_draft.or(cfg.sigma_target), bias: cfg.draft_bias },
        v => return Err(EngineError::InvalidConfig(format!("decode_baseline called with variant {}", v.as_str()))),
    };
    let is_target = cfg.variant == Variant::TargetOnly;
    let streams = RngStreams::new(cfg.seed);
    let started = Instant::now();
    let mut history = h0.clone();
    let mut forecast = Vec::with_capacity(cfg.horizon_patches);
    let mut trace = DecodeTrace::default();
    for step in 0..cfg.horizon_patches {
        let t0 = Instant::now();
        let head = model.predict(&history, &overrides).map_err(non_finite(step))?;
        let elapsed = t0.elapsed().as_secs_f64();
        let x = head.sample(&mut streams.stream(step as u64, 0, Purpose::Baseline));
        history.push(x.clone())?;
        forecast.push(x);
        if is_target {
            trace.totals.target_passes += 1;
            trace.totals.target_forward_equivalents += 1;
            trace.wall_times.target_total += elapsed;
        } else {
            trace.totals.draft_passes += 1;
            trace.wall_times.draft_total += elapsed;
        }
        trace.totals.patches_emitted += 1;
        trace.totals.patches_kept += 1;
        trace.rounds.push(RoundRecord {
            round: step,
            proposals: vec![],
            run_length: 0,
            final_draw_source: FinalDrawSource::Baseline,
            outputs_emitted: 1,
            outputs_kept: 1,
            residual_target_draws: 0,
            residual_degraded: false,
        });
    }
    trace.wall_times.total = started.elapsed().as_secs_f64();
    Ok((forecast, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle(mean: f64, sigma: f64) -> ForecastModel {
        ForecastModel::synthetic_oracle(vec![mean], sigma).unwrap()
    }

    fn h0() -> History {
        History::new(1, vec![0.0]).unwrap()
    }

    #[test]
    fn self_speculation_accepts_everything() {
        let m = oracle(0.3, 0.5);
        let cfg = DecodeConfig { gamma: 3, horizon_patches: 40, ..Default::default() };
        let (out, trace) = decode(&m, &m, &h0(), &cfg).unwrap();
        assert_eq!(out.len(), 40);
        assert!(trace.rounds.iter().all(|r| r.outputs_emitted == 4 && r.run_length == 3));
        assert_eq!(trace.totals.target_passes, 10);
        assert_eq!(trace.totals.target_forward_equivalents, 40);
        assert_eq!(trace.totals.draft_passes, 30);
    }

    #[test]
    fn horizon_truncates_last_round() {
        let m = oracle(0.0, 1.0);
        let cfg = DecodeConfig { gamma: 3, horizon_patches: 6, ..Default::default() };
        let (out, trace) = decode(&m, &m, &h0(), &cfg).unwrap();
        assert_eq!(out.len(), 6);
        assert_eq!(trace.rounds[1].outputs_emitted, 4);
        assert_eq!(trace.rounds[1].outputs_kept, 2);
        assert_eq!(trace.totals.patches_emitted, 8);
        assert_eq!(trace.totals.patches_kept, 6);
    }

    #[test]
    fn wrong_entry_points_and_dims() {
        let m = oracle(0.0, 1.0);
        let cfg = DecodeConfig::default();
        assert!(decode_lossless(&m, &m, &h0(), &cfg).is_err());
        let lossless = DecodeConfig { variant: Variant::Lossless, ..Default::default() };
        assert!(decode_practical(&m, &m, &h0(), &lossless).is_err());
        assert!(decode_baseline(&m, &h0(), &cfg).is_err());
        let wide = ForecastModel::synthetic_oracle(vec![0.0, 0.0], 1.0).unwrap();
        assert!(matches!(decode(&m, &wide, &h0(), &cfg), Err(EngineError::DimensionMismatch { .. })));
    }

    #[test]
    fn baseline_counts_passes() {
        let m = oracle(1.0, 0.2);
        let cfg = DecodeConfig { variant: Variant::TargetOnly, horizon_patches: 10, ..Default::default() };
        let (out, trace) = decode_baseline(&m, &h0(), &cfg).unwrap();
        assert_eq!(out.len(), 10);
        assert_eq!(trace.totals.target_passes, 10);
        assert_eq!(trace.totals.draft_passes, 0);
        let draft_cfg = DecodeConfig { variant: Variant::DraftOnly, ..cfg };
        let (_, trace) = decode_baseline(&m, &h0(), &draft_cfg).unwrap();
        assert_eq!(trace.totals.draft_passes, 10);
    }

    #[test]
    fn non_finite_head_aborts_with_round() {
        let m = oracle(0.0, 1.0);
        let cfg = DecodeConfig { sigma_target: Some(1.0), horizon_patches: 5, ..Default::default() };
        let huge = ForecastModel::synthetic_oracle(vec![f64::MAX], 1.0).unwrap();
        // f64::MAX mean stays finite; an infinite sample makes the next head non-finite only for persistence
        let persist = ForecastModel::persistence(1, 1.0, vec![0.0]).unwrap();
        let h = History::from_patches(1, vec![0.0], &[vec![f64::INFINITY]]).unwrap();
        match decode(&persist, &persist, &h, &cfg) {
            Err(EngineError::NonFinite { round, .. }) => assert_eq!(round, 0),
            other => panic!("expected NonFinite, got {other:?}"),
        }
        assert!(decode(&huge, &m, &h0(), &cfg).is_ok());
    }
}
