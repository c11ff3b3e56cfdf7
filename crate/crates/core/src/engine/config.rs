use serde::{Deserialize, Serialize};

use super::{EngineError, Result};
use crate::model::{ForecastModel, HeadOverrides};
use crate::prob::{AcceptanceRule, VarianceSharing};
use crate::rng::RngStreams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Fallback to a plain target draw on rejection.
    Practical,
    /// Residual sampling on rejection; reproduces the target chain exactly.
    Lossless,
    TargetOnly,
    DraftOnly,
}

impl Variant {
    pub fn is_speculative(self) -> bool {
        matches!(self, Variant::Practical | Variant::Lossless)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Practical => "practical",
            Variant::Lossless => "lossless",
            Variant::TargetOnly => "target_only",
            Variant::DraftOnly => "draft_only",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "practical" => Ok(Variant::Practical),
            "lossless" => Ok(Variant::Lossless),
            "target_only" => Ok(Variant::TargetOnly),
            "draft_only" => Ok(Variant::DraftOnly),
            other => Err(format!("unknown variant {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub gamma: usize,
    pub variant: Variant,
    pub tolerance_lambda: f64,
    pub horizon_patches: usize,
    pub seed: u64,
    pub sigma_target: Option<f64>,
    pub sigma_draft: Option<f64>,
    /// Draft mean perturbation; `None` keeps the draft model's own setting.
    pub draft_bias: Option<f64>,
    #[serde(default)]
    pub variance_sharing: VarianceSharing,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            gamma: 3,
            variant: Variant::Practical,
            tolerance_lambda: 1.0,
            horizon_patches: 1,
            seed: 0,
            sigma_target: None,
            sigma_draft: None,
            draft_bias: None,
            variance_sharing: VarianceSharing::Shared,
        }
    }
}

fn positive(name: &str, v: Option<f64>) -> Result<()> {
    match v {
        Some(s) if !(s.is_finite() && s > 0.0) => {
            Err(EngineError::InvalidConfig(format!("{name} must be positive and finite, got {s}")))
        }
        _ => Ok(()),
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.variant.is_speculative() && self.gamma == 0 {
            return Err(EngineError::InvalidConfig("gamma must be >= 1".into()));
        }
        if self.horizon_patches == 0 {
            return Err(EngineError::InvalidConfig("horizon must be >= 1 patch".into()));
        }
        AcceptanceRule::new(self.tolerance_lambda, self.variance_sharing)?;
        positive("sigma_target", self.sigma_target)?;
        positive("sigma_draft", self.sigma_draft)?;
        if let Some(b) = self.draft_bias {
            if !(b.is_finite() && b >= 0.0) {
                return Err(EngineError::InvalidConfig(format!("draft_bias must be >= 0, got {b}")));
            }
        }
        if self.variance_sharing == VarianceSharing::Shared {
            if let (Some(a), Some(b)) = (self.sigma_target, self.sigma_draft) {
                if a != b {
                    return Err(EngineError::InvalidConfig(
                        "shared-variance mode needs sigma_target == sigma_draft".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// The same configuration with an independent seed for sub-session `lane`.
    pub fn for_lane(&self, lane: u64) -> Self {
        Self { seed: RngStreams::new(self.seed).derive(lane).seed(), ..self.clone() }
    }

    pub(crate) fn rule(&self) -> Result<AcceptanceRule> {
        Ok(AcceptanceRule::new(self.tolerance_lambda, self.variance_sharing)?)
    }

    /// Head overrides for (target, draft).
    ///
    /// In shared mode both heads use one scale: whichever sigma is configured,
    /// else the target model's own.
    pub(crate) fn overrides(&self, target: &ForecastModel, draft: &ForecastModel) -> (HeadOverrides, HeadOverrides) {
        let (st, sd) = match self.variance_sharing {
            VarianceSharing::Shared => {
                let s = self.sigma_target.or(self.sigma_draft).unwrap_or(target.sigma());
                (s, s)
            }
            VarianceSharing::Unequal => (
                self.sigma_target.unwrap_or(target.sigma()),
                self.sigma_draft.unwrap_or(draft.sigma()),
            ),
        };
        (
            HeadOverrides { sigma: Some(st), bias: Some(0.0) },
            HeadOverrides { sigma: Some(sd), bias: self.draft_bias },
        )
    }
}
