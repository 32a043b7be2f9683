//! Differentiable multi-loss toy problems.
//!
//! A [`Problem`] maps a parameter vector to one loss value per loss and,
//! when it can, one analytic gradient per loss. Stochastic problems draw
//! their noise from the caller's RNG, so a fixed seed gives a fixed
//! sequence of observations.

pub mod image;
pub mod multiscale;
pub mod quadratic;
pub mod regression;
pub mod stereo;
pub mod synthetic;

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use image::{Image, ImageFitProblem, ImageNoise};
pub use multiscale::MultiScaleComposite;
pub use quadratic::{QuadraticProblem, QuadraticTerm};
pub use regression::MixedNormRegression;
pub use stereo::StereoPairProblem;
pub use synthetic::SyntheticStreams;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::weights::LossObservation;

/// Name and pyramid level of one loss.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LossLabel {
    pub name: String,
    pub scale: u32,
}

impl LossLabel {
    pub fn new(name: &str, scale: u32) -> Self {
        Self {
            name: name.into(),
            scale,
        }
    }
}

pub trait Problem: Send + Sync + core::fmt::Debug {
    fn name(&self) -> &'static str;

    fn parameter_dim(&self) -> usize;

    fn loss_count(&self) -> usize;

    fn loss_labels(&self) -> Vec<LossLabel>;

    fn supports_gradients(&self) -> bool {
        true
    }

    fn evaluate(&self, params: &[f64], step: u64, rng: &mut dyn RngCore) -> Result<LossObservation>;

    /// Known minimizer shared by every loss, if there is one.
    fn optimum(&self) -> Option<&[f64]> {
        None
    }

    fn initial_point(&self) -> Vec<f64>;

    /// Losses that carry the `1/2^s` attenuation in a multiscale composite.
    fn attenuated_losses(&self) -> Vec<bool> {
        alloc::vec![false; self.loss_count()]
    }

    /// The same problem evaluated at pyramid level `scale` (2^scale pooling).
    fn downscaled(&self, _scale: u32) -> Result<Box<dyn Problem>> {
        Err(Error::UnsupportedBase {
            problem: self.name(),
        })
    }
}

pub(crate) fn check_dim(params: &[f64], dim: usize) -> Result<()> {
    if params.len() == dim {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            what: "parameter vector",
            expected: dim,
            found: params.len(),
        })
    }
}

/// Buildable description of a problem.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    /// Explicit quadratic terms `|A_i x - b_i|^2`.
    Quadratic {
        terms: Vec<QuadraticTerm>,
        optimum: Option<Vec<f64>>,
    },
    /// Random well-conditioned quadratics generated from `seed`.
    RandomQuadratic {
        dim: usize,
        losses: usize,
        rows: usize,
        noise: f64,
        shared_optimum: bool,
        loss_scales: Vec<f64>,
        seed: u64,
    },
    MixedNorm {
        samples: usize,
        dim: usize,
        noise: f64,
        seed: u64,
    },
    ImageFit {
        target: Image,
        noise: ImageNoise,
    },
    Stereo {
        left: Image,
        disparity: usize,
        noise: ImageNoise,
    },
    Multiscale {
        base: Box<ProblemSpec>,
        scales: u32,
    },
    Synthetic {
        levels: Vec<f64>,
        decay_rates: Vec<f64>,
        noise: Vec<f64>,
    },
}

impl ProblemSpec {
    pub const NAMES: [&'static str; 6] = ["quadratic", "mixed-norm", "image-fit", "stereo", "multiscale", "synthetic"];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Quadratic { .. } | Self::RandomQuadratic { .. } => "quadratic",
            Self::MixedNorm { .. } => "mixed-norm",
            Self::ImageFit { .. } => "image-fit",
            Self::Stereo { .. } => "stereo",
            Self::Multiscale { .. } => "multiscale",
            Self::Synthetic { .. } => "synthetic",
        }
    }

    pub fn build(&self) -> Result<Box<dyn Problem>> {
        Ok(match self {
            Self::Quadratic { terms, optimum } => {
                Box::new(QuadraticProblem::new(terms.clone(), optimum.clone())?)
            }
            Self::RandomQuadratic {
                dim,
                losses,
                rows,
                noise,
                shared_optimum,
                loss_scales,
                seed,
            } => Box::new(QuadraticProblem::random(
                *dim,
                *losses,
                *rows,
                *noise,
                *shared_optimum,
                loss_scales,
                &mut ChaCha8Rng::seed_from_u64(*seed),
            )?),
            Self::MixedNorm {
                samples,
                dim,
                noise,
                seed,
            } => Box::new(MixedNormRegression::random(
                *samples,
                *dim,
                *noise,
                &mut ChaCha8Rng::seed_from_u64(*seed),
            )?),
            Self::ImageFit { target, noise } => Box::new(ImageFitProblem::new(target.clone(), *noise)?),
            Self::Stereo {
                left,
                disparity,
                noise,
            } => Box::new(StereoPairProblem::new(left.clone(), *disparity, *noise)?),
            Self::Multiscale { base, scales } => {
                Box::new(MultiScaleComposite::new(base.build()?, *scales)?)
            }
            Self::Synthetic {
                levels,
                decay_rates,
                noise,
            } => Box::new(SyntheticStreams::new(levels.clone(), decay_rates.clone(), noise.clone())?),
        })
    }

    /// Two quadratics with `A_1 = I`, `A_2 = scale * I` and the given
    /// shared optimum.
    pub fn scaled_identity_pair(optimum: Vec<f64>, scale: f64, noise: f64) -> Result<Self> {
        let n = optimum.len();
        let terms = [1.0, scale]
            .into_iter()
            .map(|s| {
                let a = Matrix::identity(n).scaled(s);
                let b = a.mul_vec(&optimum);
                QuadraticTerm::new(a, b, noise)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::Quadratic {
            terms,
            optimum: Some(optimum),
        })
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use alloc::vec;
    use rand::Rng;

    pub fn seeded(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Per-coordinate central differences against the analytic gradients,
    /// with the noise frozen by reseeding before every evaluation.
    pub fn assert_gradients_match(problem: &dyn Problem, points: usize, seed: u64) {
        let mut rng = seeded(seed);
        let dim = problem.parameter_dim();
        let base = problem.initial_point();
        for _ in 0..points {
            let x: Vec<f64> = base.iter().map(|b| b + rng.random_range(-0.4..0.4)).collect();
            let eval_seed: u64 = rng.random();
            let eval = |p: &[f64]| problem.evaluate(p, 1, &mut seeded(eval_seed)).unwrap();
            let obs = eval(&x);
            let grads = obs.gradients.as_ref().unwrap();
            let mut fd = vec![vec![0.0; dim]; problem.loss_count()];
            let mut xp = x.clone();
            for j in 0..dim {
                let h = 1e-6 * x[j].abs().max(1.0);
                xp[j] = x[j] + h;
                let plus = eval(&xp).losses;
                xp[j] = x[j] - h;
                let minus = eval(&xp).losses;
                xp[j] = x[j];
                for i in 0..problem.loss_count() {
                    fd[i][j] = (plus[i] - minus[i]) / (2.0 * h);
                }
            }
            for (i, (g, f)) in grads.iter().zip(&fd).enumerate() {
                let scale = g.iter().chain(f).fold(1e-12, |m: f64, v| m.max(v.abs()));
                let err = g.iter().zip(f).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
                assert!(err <= 1e-5 * scale, "loss {i}: max error {err} vs scale {scale}");
            }
        }
    }
}
