use std::collections::VecDeque;

use super::{ModelError, Result};

/// The most recent `capacity` patches of one channel, oldest first.
///
/// Windows shorter than the requested lookback are left-padded with a fixed
/// pad patch (the training mean patch).
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    patches: VecDeque<Vec<f64>>,
    capacity: usize,
    total: u64,
    pad: Vec<f64>,
}

impl History {
    pub fn new(capacity: usize, pad: Vec<f64>) -> Result<Self> {
        if capacity == 0 || pad.is_empty() {
            return Err(ModelError::InvalidParameter("history needs capacity >= 1 and a non-empty pad patch".into()));
        }
        Ok(Self { patches: VecDeque::with_capacity(capacity), capacity, total: 0, pad })
    }

    /// A history preloaded with `patches`, keeping the last `capacity`.
    pub fn from_patches(capacity: usize, pad: Vec<f64>, patches: &[Vec<f64>]) -> Result<Self> {
        let mut h = Self::new(capacity, pad)?;
        for p in patches {
            h.push(p.clone())?;
        }
        Ok(h)
    }

    pub fn dim(&self) -> usize {
        self.pad.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    /// Patches appended over the lifetime of this history.
    pub fn total_emitted(&self) -> u64 {
        self.total
    }

    pub fn push(&mut self, patch: Vec<f64>) -> Result<()> {
        if patch.len() != self.dim() {
            return Err(ModelError::DimensionMismatch { expected: self.dim(), found: patch.len() });
        }
        if self.patches.len() == self.capacity {
            self.patches.pop_front();
        }
        self.patches.push_back(patch);
        self.total += 1;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.patches.iter()
    }

    pub fn last(&self) -> Option<&Vec<f64>> {
        self.patches.back()
    }

    /// Flat window of the last `k` patches of `self ++ extra`, oldest first.
    pub fn window_extended(&self, extra: &[Vec<f64>], k: usize) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(k * d);
        let available = self.patches.len() + extra.len();
        for _ in available..k {
            out.extend_from_slice(&self.pad);
        }
        let take = k.min(available);
        let from_extra = take.min(extra.len());
        let from_hist = take - from_extra;
        for p in self.patches.iter().skip(self.patches.len() - from_hist) {
            out.extend_from_slice(p);
        }
        for p in &extra[extra.len() - from_extra..] {
            out.extend_from_slice(p);
        }
        out
    }

    /// Flat `(k + extra.len())`-patch buffer whose `i`-th `k`-patch window is
    /// `window_extended(&extra[..i], k)`.
    pub fn prefix_windows(&self, extra: &[Vec<f64>], k: usize) -> Vec<f64> {
        let d = self.dim();
        let mut out = self.window(k);
        out.reserve(extra.len() * d);
        for p in extra {
            out.extend_from_slice(p);
        }
        out
    }

    pub fn window(&self, k: usize) -> Vec<f64> {
        self.window_extended(&[], k)
    }

    /// Last patch of `self ++ extra`, or the pad patch when both are empty.
    pub fn last_extended<'a>(&'a self, extra: &'a [Vec<f64>]) -> &'a [f64] {
        extra.last().or(self.patches.back()).unwrap_or(&self.pad)
    }
}
