//! Coefficient-of-variation weighting.
//!
//! Each loss is turned into a loss ratio `l_t = L_t / mu_L(t-1)` (the current
//! loss over the running mean of its past values), which puts every loss on
//! a common scale with a meaningful zero. The weight of a loss is the
//! coefficient of variation `sigma_l / mu_l` of its ratio history,
//! normalized over all losses.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::stats::{DecaySpec, WelfordAccumulator};
use crate::weights::{equal_weights, WeightVector};

/// Floor on the standard deviation for the inverse variants.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Which statistic drives the weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum CovVariant {
    /// `sigma_l / mu_l` over loss ratios.
    #[default]
    RatioCov,
    /// `sigma_L / mu_L` over raw losses.
    LossCov,
    /// `mu_l / sigma_l`.
    RatioInverse,
    /// `mu_L / sigma_L`.
    LossInverse,
}

impl CovVariant {
    pub const ALL: [CovVariant; 4] = [
        Self::RatioCov,
        Self::LossCov,
        Self::RatioInverse,
        Self::LossInverse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::RatioCov => "ratio-cov",
            Self::LossCov => "loss-cov",
            Self::RatioInverse => "ratio-inverse",
            Self::LossInverse => "loss-inverse",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == name)
    }

    fn uses_ratios(self) -> bool {
        matches!(self, Self::RatioCov | Self::RatioInverse)
    }

    fn is_inverse(self) -> bool {
        matches!(self, Self::RatioInverse | Self::LossInverse)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct LossTracker {
    loss_mean: WelfordAccumulator,
    ratio_stats: WelfordAccumulator,
}

/// Running statistics for every tracked loss.
#[derive(Debug, Clone, PartialEq)]
pub struct CovState {
    trackers: Vec<LossTracker>,
    variant: CovVariant,
    decay: DecaySpec,
}

impl CovState {
    pub fn new(loss_count: usize, variant: CovVariant, decay: DecaySpec) -> Result<Self> {
        if loss_count == 0 {
            return Err(Error::Empty { what: "loss list" });
        }
        let tracker = LossTracker {
            loss_mean: WelfordAccumulator::new(decay),
            ratio_stats: WelfordAccumulator::new(decay),
        };
        Ok(Self {
            trackers: alloc::vec![tracker; loss_count],
            variant,
            decay,
        })
    }

    pub fn variant(&self) -> CovVariant {
        self.variant
    }

    pub fn decay(&self) -> DecaySpec {
        self.decay
    }

    pub fn loss_count(&self) -> usize {
        self.trackers.len()
    }

    pub fn steps_seen(&self) -> u64 {
        self.trackers[0].loss_mean.step_count()
    }

    /// Running mean of loss `i`'s raw values.
    pub fn loss_mean(&self, i: usize) -> Option<&WelfordAccumulator> {
        self.trackers.get(i).map(|t| &t.loss_mean)
    }

    /// Running mean and spread of loss `i`'s ratios.
    pub fn ratio_stats(&self, i: usize) -> Option<&WelfordAccumulator> {
        self.trackers.get(i).map(|t| &t.ratio_stats)
    }

    /// Folds in one step of losses and returns the weights for that step.
    ///
    /// The state is left untouched when the input is rejected.
    pub fn observe(&mut self, losses: &[f64]) -> Result<WeightVector> {
        if losses.len() != self.trackers.len() {
            return Err(Error::LengthMismatch {
                what: "loss list",
                expected: self.trackers.len(),
                found: losses.len(),
            });
        }
        for (index, &value) in losses.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss { index, value });
            }
            if value < 0.0 {
                return Err(Error::NegativeLoss { index, value });
            }
        }

        for (tracker, &loss) in self.trackers.iter_mut().zip(losses) {
            let ratio = match tracker.loss_mean.mean() {
                Ok(prev) if prev > 0.0 => loss / prev,
                // first step, or a zero running mean: treat as uninformative
                _ => 1.0,
            };
            tracker.loss_mean.update(loss)?;
            tracker.ratio_stats.update(ratio)?;
        }

        if self.steps_seen() == 1 {
            return equal_weights(self.trackers.len());
        }

        let uses_ratios = self.variant.uses_ratios();
        let mut means = Vec::with_capacity(self.trackers.len());
        let mut stds = Vec::with_capacity(self.trackers.len());
        for tracker in &self.trackers {
            let acc = if uses_ratios {
                &tracker.ratio_stats
            } else {
                &tracker.loss_mean
            };
            means.push(acc.mean()?);
            stds.push(acc.std()?);
        }

        // No loss has moved yet: every variant degenerates to equal weights.
        if stds.iter().all(|&s| s == 0.0) {
            return equal_weights(self.trackers.len());
        }

        let scores = means
            .iter()
            .zip(&stds)
            .map(|(&mean, &std)| {
                if self.variant.is_inverse() {
                    mean / std.max(SIGMA_FLOOR)
                } else if mean > 0.0 {
                    std / mean
                } else {
                    0.0
                }
            })
            .collect();
        WeightVector::normalize(scores)
    }
}
