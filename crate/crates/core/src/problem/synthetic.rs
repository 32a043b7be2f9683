use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::{LossLabel, Problem};
use crate::error::{Error, Result};
use crate::weights::LossObservation;

/// Gradient-free loss streams `L_i(t) = level_i * exp(-rate_i * t) + noise_i * |z|`
/// that ignore the parameters. Useful for exercising weighting schemes on
/// controlled loss statistics; strategies that need gradients reject it.
#[derive(Debug, Clone)]
pub struct SyntheticStreams {
    levels: Vec<f64>,
    decay_rates: Vec<f64>,
    noise: Vec<f64>,
}

impl SyntheticStreams {
    pub fn new(levels: Vec<f64>, decay_rates: Vec<f64>, noise: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Empty { what: "synthetic levels" });
        }
        for (what, v) in [("decay rates", &decay_rates), ("noise", &noise)] {
            if v.len() != levels.len() {
                return Err(Error::LengthMismatch {
                    what,
                    expected: levels.len(),
                    found: v.len(),
                });
            }
        }
        if levels
            .iter()
            .chain(&decay_rates)
            .chain(&noise)
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::InvalidParameter {
                name: "synthetic stream",
                reason: "levels, rates and noise must be finite and non-negative",
            });
        }
        Ok(Self {
            levels,
            decay_rates,
            noise,
        })
    }

    /// Constant streams at the given levels.
    pub fn constant(levels: Vec<f64>) -> Result<Self> {
        let n = levels.len();
        Self::new(levels, vec![0.0; n], vec![0.0; n])
    }
}

impl Problem for SyntheticStreams {
    fn name(&self) -> &'static str {
        "synthetic"
    }

    fn parameter_dim(&self) -> usize {
        1
    }

    fn loss_count(&self) -> usize {
        self.levels.len()
    }

    fn loss_labels(&self) -> Vec<LossLabel> {
        (0..self.levels.len())
            .map(|i| LossLabel::new(&format!("stream{i}"), 0))
            .collect()
    }

    fn supports_gradients(&self) -> bool {
        false
    }

    fn evaluate(&self, params: &[f64], step: u64, rng: &mut dyn RngCore) -> Result<LossObservation> {
        super::check_dim(params, 1)?;
        let t = step as f64;
        let losses = self
            .levels
            .iter()
            .zip(&self.decay_rates)
            .zip(&self.noise)
            .map(|((level, rate), noise)| {
                let mut l = level * libm::exp(-rate * t);
                if *noise > 0.0 {
                    let z: f64 = StandardNormal.sample(&mut *rng);
                    l += noise * z.abs();
                }
                l
            })
            .collect();
        LossObservation::new(losses, None, step)
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![0.0]
    }
}
