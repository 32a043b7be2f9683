//! First-order optimizers for the combined gradient.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const DEFAULT_LEARNING_RATE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerSpec {
    Sgd { lr: f64, momentum: f64 },
    Adam { lr: f64 },
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        Self::Adam {
            lr: DEFAULT_LEARNING_RATE,
        }
    }
}

impl OptimizerSpec {
    pub const NAMES: [&'static str; 2] = ["sgd", "adam"];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sgd { .. } => "sgd",
            Self::Adam { .. } => "adam",
        }
    }

    pub fn lr(&self) -> f64 {
        match self {
            Self::Sgd { lr, .. } | Self::Adam { lr } => *lr,
        }
    }

    pub fn with_lr(self, lr: f64) -> Self {
        match self {
            Self::Sgd { momentum, .. } => Self::Sgd { lr, momentum },
            Self::Adam { .. } => Self::Adam { lr },
        }
    }

    pub fn build(&self, dim: usize) -> Result<Optimizer> {
        let lr = self.lr();
        if !(lr.is_finite() && lr > 0.0) {
            return Err(Error::InvalidParameter {
                name: "learning rate",
                reason: "must be finite and positive",
            });
        }
        Ok(match *self {
            Self::Sgd { lr, momentum } => {
                if !(0.0..1.0).contains(&momentum) {
                    return Err(Error::InvalidParameter {
                        name: "momentum",
                        reason: "must lie in [0, 1)",
                    });
                }
                Optimizer::Sgd {
                    lr,
                    momentum,
                    velocity: vec![0.0; dim],
                }
            }
            Self::Adam { lr } => Optimizer::Adam(Adam::new(lr, dim)),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64, dim: usize) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Sgd {
        lr: f64,
        momentum: f64,
        velocity: Vec<f64>,
    },
    Adam(Adam),
}

impl Optimizer {
    pub fn dim(&self) -> usize {
        match self {
            Self::Sgd { velocity, .. } => velocity.len(),
            Self::Adam(adam) => adam.m.len(),
        }
    }

    /// Updates `params` in place. Nothing changes if the gradient is
    /// rejected.
    pub fn step(&mut self, params: &mut [f64], gradient: &[f64]) -> Result<()> {
        let dim = self.dim();
        for (what, found) in [("parameters", params.len()), ("gradient", gradient.len())] {
            if found != dim {
                return Err(Error::LengthMismatch {
                    what,
                    expected: dim,
                    found,
                });
            }
        }
        if let Some(index) = gradient.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { index });
        }
        match self {
            Self::Sgd {
                lr,
                momentum,
                velocity,
            } => {
                for ((p, v), g) in params.iter_mut().zip(velocity.iter_mut()).zip(gradient) {
                    *v = *momentum * *v + g;
                    *p -= *lr * *v;
                }
            }
            Self::Adam(adam) => {
                adam.t += 1;
                let t = adam.t as f64;
                let bias1 = 1.0 - libm::pow(adam.beta1, t);
                let bias2 = 1.0 - libm::pow(adam.beta2, t);
                for (i, (p, g)) in params.iter_mut().zip(gradient).enumerate() {
                    adam.m[i] = adam.beta1 * adam.m[i] + (1.0 - adam.beta1) * g;
                    adam.v[i] = adam.beta2 * adam.v[i] + (1.0 - adam.beta2) * g * g;
                    let m_hat = adam.m[i] / bias1;
                    let v_hat = adam.v[i] / bias2;
                    *p -= adam.lr * m_hat / (libm::sqrt(v_hat) + adam.eps);
                }
            }
        }
        Ok(())
    }
}
