use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::{LossLabel, Problem};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::weights::LossObservation;

pub const HUBER_DELTA: f64 = 1.0;

/// Linear regression scored by two heterogeneous losses over the same
/// residual `r = D x - y`: mean squared error and mean Huber loss.
/// Targets get fresh Gaussian noise on every evaluation.
#[derive(Debug, Clone)]
pub struct MixedNormRegression {
    design: Matrix,
    targets: Vec<f64>,
    noise: f64,
    optimum: Option<Vec<f64>>,
}

pub fn huber(r: f64) -> f64 {
    if r.abs() <= HUBER_DELTA {
        0.5 * r * r
    } else {
        HUBER_DELTA * (r.abs() - 0.5 * HUBER_DELTA)
    }
}

fn huber_slope(r: f64) -> f64 {
    r.clamp(-HUBER_DELTA, HUBER_DELTA)
}

impl MixedNormRegression {
    pub fn new(design: Matrix, targets: Vec<f64>, noise: f64) -> Result<Self> {
        if targets.len() != design.rows() {
            return Err(Error::LengthMismatch {
                what: "regression targets",
                expected: design.rows(),
                found: targets.len(),
            });
        }
        if !(noise.is_finite() && noise >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "noise",
                reason: "must be finite and non-negative",
            });
        }
        Ok(Self {
            design,
            targets,
            noise,
            optimum: None,
        })
    }

    /// Gaussian design with targets generated by a random true parameter.
    pub fn random(samples: usize, dim: usize, noise: f64, rng: &mut dyn RngCore) -> Result<Self> {
        if samples == 0 || dim == 0 {
            return Err(Error::Empty { what: "regression problem" });
        }
        let data = (0..samples * dim).map(|_| StandardNormal.sample(&mut *rng)).collect();
        let design = Matrix::new(samples, dim, data)?;
        let truth: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut *rng)).collect();
        let targets = design.mul_vec(&truth);
        let mut problem = Self::new(design, targets, noise)?;
        problem.optimum = Some(truth);
        Ok(problem)
    }

    /// Losses and gradients for an explicit residual-producing target set.
    fn losses_at(&self, params: &[f64], targets: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = targets.len() as f64;
        let residual: Vec<f64> = self
            .design
            .mul_vec(params)
            .iter()
            .zip(targets)
            .map(|(p, t)| p - t)
            .collect();
        let mse = residual.iter().map(|r| r * r).sum::<f64>() / n;
        let hub = residual.iter().map(|r| huber(*r)).sum::<f64>() / n;
        let g_mse: Vec<f64> = residual.iter().map(|r| 2.0 * r / n).collect();
        let g_hub: Vec<f64> = residual.iter().map(|r| huber_slope(*r) / n).collect();
        (
            vec![mse, hub],
            vec![
                self.design.transpose_mul_vec(&g_mse),
                self.design.transpose_mul_vec(&g_hub),
            ],
        )
    }
}

impl Problem for MixedNormRegression {
    fn name(&self) -> &'static str {
        "mixed-norm"
    }

    fn parameter_dim(&self) -> usize {
        self.design.cols()
    }

    fn loss_count(&self) -> usize {
        2
    }

    fn loss_labels(&self) -> Vec<LossLabel> {
        vec![LossLabel::new("l2", 0), LossLabel::new("huber", 0)]
    }

    fn evaluate(&self, params: &[f64], step: u64, rng: &mut dyn RngCore) -> Result<LossObservation> {
        super::check_dim(params, self.parameter_dim())?;
        let targets: Vec<f64> = if self.noise > 0.0 {
            self.targets
                .iter()
                .map(|t| {
                    let z: f64 = StandardNormal.sample(&mut *rng);
                    t + self.noise * z
                })
                .collect()
        } else {
            self.targets.clone()
        };
        let (losses, grads) = self.losses_at(params, &targets);
        LossObservation::new(losses, Some(grads), step)
    }

    fn optimum(&self) -> Option<&[f64]> {
        self.optimum.as_deref()
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![0.0; self.parameter_dim()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::testing::{assert_gradients_match, seeded};

    #[test]
    fn zero_residual() {
        let design = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let p = MixedNormRegression::new(design, vec![0.5, -1.0], 0.0).unwrap();
        let obs = p.evaluate(&[0.5, -1.0], 1, &mut seeded(0)).unwrap();
        assert_eq!(obs.losses, vec![0.0, 0.0]);
        for g in obs.gradients.unwrap() {
            assert!(g.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn documented_residual() {
        // r = (2, 0) with n = 2
        let design = Matrix::identity(2);
        let p = MixedNormRegression::new(design, vec![0.0, 0.0], 0.0).unwrap();
        let obs = p.evaluate(&[2.0, 0.0], 1, &mut seeded(0)).unwrap();
        assert_eq!(obs.losses, vec![2.0, 0.75]);
    }

    #[test]
    fn mismatched_targets() {
        assert!(MixedNormRegression::new(Matrix::identity(3), vec![0.0; 2], 0.0).is_err());
    }

    #[test]
    fn noise_makes_losses_stochastic() {
        let p = MixedNormRegression::random(20, 3, 0.5, &mut seeded(1)).unwrap();
        let x = [0.0; 3];
        let a = p.evaluate(&x, 1, &mut seeded(2)).unwrap();
        let b = p.evaluate(&x, 1, &mut seeded(3)).unwrap();
        assert_ne!(a.losses, b.losses);
        assert_eq!(a, p.evaluate(&x, 1, &mut seeded(2)).unwrap());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let p = MixedNormRegression::random(12, 4, 0.3, &mut seeded(5)).unwrap();
        assert_gradients_match(&p, 30, 6);
    }
}
