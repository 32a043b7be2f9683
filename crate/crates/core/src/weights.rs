use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Per-loss combination coefficients.
///
/// `normalized` vectors sum to one. Unnormalized vectors come from
/// uncertainty weighting, whose weights are free to drift.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
    normalized: bool,
}

impl WeightVector {
    /// Divides `scores` by their sum. Falls back to equal weights when every
    /// score is zero.
    pub fn normalize(scores: Vec<f64>) -> Result<Self> {
        check_entries(&scores)?;
        let total: f64 = scores.iter().sum();
        if total == 0.0 {
            return equal_weights(scores.len());
        }
        let weights = scores.into_iter().map(|s| s / total).collect();
        Ok(Self {
            weights,
            normalized: true,
        })
    }

    pub fn unnormalized(weights: Vec<f64>) -> Result<Self> {
        check_entries(&weights)?;
        Ok(Self {
            weights,
            normalized: false,
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Copy rescaled to sum to one (identity for normalized vectors).
    pub fn to_normalized(&self) -> Self {
        if self.normalized {
            return self.clone();
        }
        Self::normalize(self.weights.clone()).expect("entries already validated")
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.weights
    }
}

fn check_entries(w: &[f64]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::Empty { what: "weight vector" });
    }
    for (index, &value) in w.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::InvalidParameter {
                name: "weight",
                reason: "entries must be finite",
            });
        }
        if value < 0.0 {
            return Err(Error::NonPositiveWeight { index, value });
        }
    }
    Ok(())
}

pub fn equal_weights(n: usize) -> Result<WeightVector> {
    if n == 0 {
        return Err(Error::Empty { what: "loss list" });
    }
    Ok(WeightVector {
        weights: vec![1.0 / n as f64; n],
        normalized: true,
    })
}

/// Hand-tuned weights rescaled so they sum to one.
pub fn static_weights(raw: &[f64]) -> Result<WeightVector> {
    if raw.is_empty() {
        return Err(Error::Empty { what: "static weights" });
    }
    if let Some((index, &value)) = raw
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v > 0.0))
    {
        return Err(Error::NonPositiveWeight { index, value });
    }
    WeightVector::normalize(raw.to_vec())
}

/// Loss values (and optionally per-loss gradients) observed at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct LossObservation {
    pub losses: Vec<f64>,
    pub gradients: Option<Vec<Vec<f64>>>,
    pub step: u64,
}

impl LossObservation {
    pub fn new(losses: Vec<f64>, gradients: Option<Vec<Vec<f64>>>, step: u64) -> Result<Self> {
        let obs = Self {
            losses,
            gradients,
            step,
        };
        obs.validate()?;
        Ok(obs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.losses.is_empty() {
            return Err(Error::Empty { what: "loss list" });
        }
        for (index, &value) in self.losses.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss { index, value });
            }
        }
        if let Some(grads) = &self.gradients {
            if grads.len() != self.losses.len() {
                return Err(Error::LengthMismatch {
                    what: "gradient list",
                    expected: self.losses.len(),
                    found: grads.len(),
                });
            }
            let dim = grads[0].len();
            if let Some(g) = grads.iter().find(|g| g.len() != dim) {
                return Err(Error::LengthMismatch {
                    what: "gradient vector",
                    expected: dim,
                    found: g.len(),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }
}
