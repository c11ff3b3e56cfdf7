use std::io::Write;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalDrawSource {
    /// All proposals accepted; one extra patch from the last target head.
    TargetNext,
    /// Practical variant after a rejection.
    TargetFallback,
    /// Lossless variant after a rejection.
    Residual,
    /// Single-model baseline step.
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalRecord {
    pub x: Vec<f64>,
    pub log_q: f64,
    pub log_p: f64,
    pub alpha: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Proposals up to and including the first rejection.
    pub proposals: Vec<ProposalRecord>,
    /// Accepted proposals `n`.
    pub run_length: usize,
    pub final_draw_source: FinalDrawSource,
    /// `L = n + 1`.
    pub outputs_emitted: usize,
    /// Outputs actually kept after horizon truncation (only the last round can lose any).
    pub outputs_kept: usize,
    /// Proposals drawn by the residual sampler (lossless rejections only).
    pub residual_target_draws: usize,
    /// Residual sampling was impossible and a target draw was used instead.
    #[serde(default)]
    pub residual_degraded: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassTotals {
    /// Logical target evaluations (one batched call per speculative round).
    pub target_passes: u64,
    /// Target work in single-forward units (`gamma + 1` per batched call).
    pub target_forward_equivalents: u64,
    pub draft_passes: u64,
    /// Sum of `L` over rounds.
    pub patches_emitted: u64,
    pub patches_kept: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WallTimes {
    pub draft_total: f64,
    pub target_total: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecodeTrace {
    pub rounds: Vec<RoundRecord>,
    pub totals: PassTotals,
    pub wall_times: WallTimes,
}

impl DecodeTrace {
    /// Equality ignoring wall-clock fields.
    pub fn same_outcome(&self, other: &DecodeTrace) -> bool {
        self.rounds == other.rounds && self.totals == other.totals
    }

    pub fn proposals_total(&self) -> usize {
        self.rounds.iter().map(|r| r.proposals.len()).sum()
    }

    pub fn proposals_accepted(&self) -> usize {
        self.rounds.iter().map(|r| r.run_length).sum()
    }

    /// Accepted / scored proposals.
    pub fn empirical_acceptance(&self) -> Option<f64> {
        let total = self.proposals_total();
        (total > 0).then(|| self.proposals_accepted() as f64 / total as f64)
    }

    pub fn mean_run_length(&self) -> Option<f64> {
        (!self.rounds.is_empty())
            .then(|| self.rounds.iter().map(|r| r.run_length as f64).sum::<f64>() / self.rounds.len() as f64)
    }

    pub fn mean_outputs(&self) -> Option<f64> {
        (!self.rounds.is_empty())
            .then(|| self.rounds.iter().map(|r| r.outputs_emitted as f64).sum::<f64>() / self.rounds.len() as f64)
    }

    /// Mean residual draws per lossless rejection.
    pub fn mean_residual_draws(&self) -> Option<f64> {
        let rej: Vec<_> = self.rounds.iter().filter(|r| r.final_draw_source == FinalDrawSource::Residual).collect();
        (!rej.is_empty())
            .then(|| rej.iter().map(|r| r.residual_target_draws as f64).sum::<f64>() / rej.len() as f64)
    }

    /// One JSON object per round.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in &self.rounds {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(text: &str) -> serde_json::Result<Vec<RoundRecord>> {
        text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
    }

    pub fn merge(&mut self, other: DecodeTrace) {
        let offset = self.rounds.len();
        self.rounds.extend(other.rounds.into_iter().map(|mut r| {
            r.round += offset;
            r
        }));
        let t = &mut self.totals;
        t.target_passes += other.totals.target_passes;
        t.target_forward_equivalents += other.totals.target_forward_equivalents;
        t.draft_passes += other.totals.draft_passes;
        t.patches_emitted += other.totals.patches_emitted;
        t.patches_kept += other.totals.patches_kept;
        self.wall_times.draft_total += other.wall_times.draft_total;
        self.wall_times.target_total += other.wall_times.target_total;
        self.wall_times.total += other.wall_times.total;
    }
}
