//! Loss-weighting strategies behind one contract: observe a step's losses
//! (and gradients where needed) and emit that step's weights.

pub mod cov;
pub mod gradnorm;
pub mod mgda;
pub mod uncertainty;

use alloc::vec::Vec;

pub use cov::{CovState, CovVariant};
pub use gradnorm::{gradnorm_weights, GradNormConfig, GradNormState, DEFAULT_TEMPERATURE};
pub use mgda::mgda_weights;
pub use uncertainty::{UncertaintyObjective, UncertaintyState};

use crate::error::{Error, Result};
use crate::stats::DecaySpec;
use crate::weights::{equal_weights, static_weights, LossObservation, WeightVector};

/// Strategy selection plus its hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub enum StrategySpec {
    Equal,
    Static(Vec<f64>),
    Cov { variant: CovVariant, decay: DecaySpec },
    Uncertainty,
    GradNorm { temperature: f64 },
    Mgda,
}

impl StrategySpec {
    pub const NAMES: [&'static str; 6] = ["equal", "static", "cov", "uncertainty", "gradnorm", "mgda"];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Equal => "equal",
            Self::Static(_) => "static",
            Self::Cov { .. } => "cov",
            Self::Uncertainty => "uncertainty",
            Self::GradNorm { .. } => "gradnorm",
            Self::Mgda => "mgda",
        }
    }

    /// CoV with the ratio statistic and full history.
    pub fn cov() -> Self {
        Self::Cov {
            variant: CovVariant::RatioCov,
            decay: DecaySpec::FullHistory,
        }
    }

    pub fn gradnorm() -> Self {
        Self::GradNorm {
            temperature: DEFAULT_TEMPERATURE,
        }
    }

    pub fn requires_gradients(&self) -> bool {
        matches!(self, Self::GradNorm { .. } | Self::Mgda)
    }

    /// Whether emitted weights sum to one.
    pub fn is_normalized(&self) -> bool {
        !matches!(self, Self::Uncertainty)
    }

    pub fn build(&self, loss_count: usize) -> Result<Strategy> {
        if loss_count == 0 {
            return Err(Error::Empty { what: "loss list" });
        }
        Ok(match self {
            Self::Equal => Strategy::Fixed(equal_weights(loss_count)?),
            Self::Static(raw) => {
                if raw.len() != loss_count {
                    return Err(Error::LengthMismatch {
                        what: "static weights",
                        expected: loss_count,
                        found: raw.len(),
                    });
                }
                Strategy::Fixed(static_weights(raw)?)
            }
            Self::Cov { variant, decay } => {
                if let DecaySpec::FixedFactor(t) = decay {
                    DecaySpec::fixed(*t)?;
                }
                Strategy::Cov(CovState::new(loss_count, *variant, *decay)?)
            }
            Self::Uncertainty => Strategy::Uncertainty(UncertaintyState::new(loss_count)?),
            Self::GradNorm { temperature } => Strategy::GradNorm(GradNormState::new(*temperature)?),
            Self::Mgda => Strategy::Mgda,
        })
    }
}

/// Live per-run strategy state.
#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    /// Equal or hand-tuned weights, constant for the whole run.
    Fixed(WeightVector),
    Cov(CovState),
    Uncertainty(UncertaintyState),
    GradNorm(GradNormState),
    Mgda,
}

impl Strategy {
    /// Weights for the observed step. Weights are treated as constants when
    /// combining that step's gradients.
    pub fn weigh(&mut self, obs: &LossObservation) -> Result<WeightVector> {
        match self {
            Self::Fixed(w) => {
                if w.len() != obs.len() {
                    return Err(Error::LengthMismatch {
                        what: "loss list",
                        expected: w.len(),
                        found: obs.len(),
                    });
                }
                Ok(w.clone())
            }
            Self::Cov(state) => state.observe(&obs.losses),
            Self::Uncertainty(state) => state.weights(),
            Self::GradNorm(state) => state.observe(obs),
            Self::Mgda => {
                let grads = obs
                    .gradients
                    .as_ref()
                    .ok_or(Error::GradientsRequired { strategy: "mgda" })?;
                mgda_weights(grads)
            }
        }
    }

    pub fn uncertainty_mut(&mut self) -> Option<&mut UncertaintyState> {
        match self {
            Self::Uncertainty(state) => Some(state),
            _ => None,
        }
    }
}
