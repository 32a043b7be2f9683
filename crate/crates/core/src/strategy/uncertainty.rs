//! Homoscedastic uncertainty weighting.
//!
//! Each loss gets a learned log-variance `s_i = log sigma_i^2` and the
//! objective becomes `sum_i 0.5 * exp(-s_i) * L_i + 0.5 * s_i`. The `s_i`
//! are trained with the same optimizer as the model parameters, so this
//! module only supplies the objective and its derivatives.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::weights::WeightVector;

#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyState {
    log_vars: Vec<f64>,
}

/// Objective value and its partial derivatives in `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyObjective {
    pub value: f64,
    pub s_gradients: Vec<f64>,
}

impl UncertaintyState {
    /// All log-variances start at zero (unit variance).
    pub fn new(loss_count: usize) -> Result<Self> {
        if loss_count == 0 {
            return Err(Error::Empty { what: "loss list" });
        }
        Ok(Self {
            log_vars: vec![0.0; loss_count],
        })
    }

    pub fn from_log_vars(log_vars: Vec<f64>) -> Result<Self> {
        if log_vars.is_empty() {
            return Err(Error::Empty { what: "log-variance list" });
        }
        if log_vars.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "log-variance",
                reason: "must be finite",
            });
        }
        Ok(Self { log_vars })
    }

    pub fn log_vars(&self) -> &[f64] {
        &self.log_vars
    }

    /// Mutable view for the optimizer, which updates `s` in place.
    pub fn log_vars_mut(&mut self) -> &mut [f64] {
        &mut self.log_vars
    }

    /// Effective per-loss weights `0.5 * exp(-s_i)`; these do not sum to one.
    /// Fails once a log-variance is so negative that the weight overflows.
    pub fn weights(&self) -> Result<WeightVector> {
        let w = self
            .log_vars
            .iter()
            .map(|s| 0.5 * libm::exp(-s))
            .collect();
        WeightVector::unnormalized(w)
    }

    pub fn objective(&self, losses: &[f64]) -> Result<UncertaintyObjective> {
        if losses.len() != self.log_vars.len() {
            return Err(Error::LengthMismatch {
                what: "loss list",
                expected: self.log_vars.len(),
                found: losses.len(),
            });
        }
        if let Some((index, &value)) = losses
            .iter()
            .enumerate()
            .find(|(_, l)| !(l.is_finite() && **l > 0.0))
        {
            return Err(Error::NonPositiveLoss { index, value });
        }
        let mut value = 0.0;
        let mut s_gradients = Vec::with_capacity(losses.len());
        for (&s, &loss) in self.log_vars.iter().zip(losses) {
            let precision = libm::exp(-s);
            value += 0.5 * precision * loss + 0.5 * s;
            s_gradients.push(0.5 * (1.0 - loss * precision));
        }
        Ok(UncertaintyObjective { value, s_gradients })
    }
}
