//! Streaming mean and variance.
//!
//! [`WelfordAccumulator`] tracks a running mean `mu` and a running second
//! moment `M` (the population variance of what it has seen) using
//!
//! ```text
//! mu_t = (1 - 1/t) mu_{t-1} + (1/t) x_t
//! M_t  = (1 - 1/t) M_{t-1}  + (1/t) (x_t - mu_{t-1}) (x_t - mu_t)
//! ```
//!
//! where `t` is the observation count for [`DecaySpec::FullHistory`] or a
//! constant for [`DecaySpec::FixedFactor`]. The first observation always
//! initializes `mu = x`, `M = 0`.

use crate::error::{Error, Result};

/// How much weight an accumulator gives to the newest observation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DecaySpec {
    /// Weight `1/n` on the n-th observation: the ordinary running mean.
    #[default]
    FullHistory,
    /// Constant weight `1/t` on every observation after the first, i.e. an
    /// exponential moving average with smoothing `1/t`.
    FixedFactor(f64),
}

impl DecaySpec {
    pub fn fixed(factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 1.0) {
            return Err(Error::InvalidParameter {
                name: "decay factor",
                reason: "must be a finite number greater than 1",
            });
        }
        Ok(Self::FixedFactor(factor))
    }

    fn factor(self, step: u64) -> f64 {
        match self {
            Self::FullHistory => step as f64,
            Self::FixedFactor(t) => t,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WelfordAccumulator {
    step_count: u64,
    mean: f64,
    second_moment: f64,
    decay: DecaySpec,
}

impl Default for WelfordAccumulator {
    fn default() -> Self {
        Self::new(DecaySpec::FullHistory)
    }
}

impl WelfordAccumulator {
    pub fn new(decay: DecaySpec) -> Self {
        Self {
            step_count: 0,
            mean: 0.0,
            second_moment: 0.0,
            decay,
        }
    }

    pub fn decay(&self) -> DecaySpec {
        self.decay
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn is_empty(&self) -> bool {
        self.step_count == 0
    }

    pub fn update(&mut self, x: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::InvalidObservation { value: x });
        }
        self.step_count += 1;
        if self.step_count == 1 {
            self.mean = x;
            self.second_moment = 0.0;
            return Ok(());
        }
        let inv_t = 1.0 / self.decay.factor(self.step_count);
        let prev_mean = self.mean;
        self.mean = prev_mean + inv_t * (x - prev_mean);
        let m = self.second_moment + inv_t * ((x - prev_mean) * (x - self.mean) - self.second_moment);
        // round-off can push M slightly below zero for near-constant streams
        self.second_moment = m.max(0.0);
        Ok(())
    }

    /// Folds a whole stream in order.
    pub fn extend<I: IntoIterator<Item = f64>>(&mut self, xs: I) -> Result<()> {
        xs.into_iter().try_for_each(|x| self.update(x))
    }

    pub fn mean(&self) -> Result<f64> {
        self.check_nonempty()?;
        Ok(self.mean)
    }

    /// The running `M`; the population variance in full-history mode.
    pub fn second_moment(&self) -> Result<f64> {
        self.check_nonempty()?;
        Ok(self.second_moment)
    }

    pub fn std(&self) -> Result<f64> {
        self.check_nonempty()?;
        Ok(libm::sqrt(self.second_moment))
    }

    fn check_nonempty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::EmptyAccumulator)
        } else {
            Ok(())
        }
    }
}
