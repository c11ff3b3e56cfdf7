//! Speculative decoding for continuous autoregressive time-series patch models.
//!
//! A small draft forecaster proposes a block of patches, a larger target
//! forecaster scores every prefix in one batched evaluation, and the longest
//! accepted run is kept. Two rejection policies are provided: the lossless
//! variant samples the normalized residual `(p - q)+` and reproduces the target
//! chain exactly, while the practical variant falls back to a plain target draw.
//!
//! The crate is organised as:
//!
//! - [`prob`]: Gaussian heads, log-domain acceptance, overlap and residual sampling.
//! - [`model`]: CSV ingestion, patching, ridge-fit linear AR forecasters.
//! - [`engine`]: the decode loops and their per-round traces.
//! - [`analysis`]: block-length law, speedup/compute predictors, estimators, bounds.
//! - [`harness`]: sweeps, cost measurement, calibration and trade-off tables.
//! - [`validation`]: the statistical self-check suites.

pub mod analysis;
pub mod engine;
pub mod harness;
pub mod model;
pub mod prob;
pub mod rng;
pub mod stats;
pub mod validation;

pub use engine::{DecodeConfig, DecodeTrace, RoundRecord, Variant};
pub use model::{ForecastModel, History, PatchSeries};
pub use prob::{AcceptanceDecision, GaussianHead, OverlapMethod, OverlapResult};
