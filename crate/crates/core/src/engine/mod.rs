//! The speculative decoding loop and its baselines.
//!
//! One session decodes one channel from an initial [`History`]. Each round the
//! draft proposes `gamma` patches autoregressively, the target scores all
//! `gamma + 1` prefixes in one batched evaluation, and proposals are accepted
//! in order until the first rejection. The round always ends with one patch
//! drawn by the target side: the extra patch when everything was accepted,
//! otherwise a fallback draw (practical) or a residual draw (lossless).
//!
//! Randomness comes from [`RngStreams`] keyed by `(round, position, purpose)`,
//! so a trace is a pure function of `(models, history, config)`.

mod config;
mod decode;
mod trace;

pub use config::{DecodeConfig, Variant};
pub use decode::{decode, decode_baseline, decode_lossless, decode_practical};
pub use trace::{DecodeTrace, FinalDrawSource, PassTotals, ProposalRecord, RoundRecord, WallTimes};

use thiserror::Error;

use crate::model::ModelError;
use crate::prob::ProbError;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid decode config: {0}")]
    InvalidConfig(String),
    #[error("target and draft dimensions differ ({target} vs {draft})")]
    DimensionMismatch { target: usize, draft: usize },
    #[error("non-finite head parameters in round {round}: {message}")]
    NonFinite { round: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

pub type Result<T> = std::result::Result<T, EngineError>;
