use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::{LossLabel, Problem};
use crate::error::{Error, Result};
use crate::linalg::{pool_vec, Matrix};
use crate::weights::LossObservation;

/// One term `|A x - b|^2`, plus half-normal noise of scale `noise` added to
/// the loss value (the gradient stays exact).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticTerm {
    pub a: Matrix,
    pub b: Vec<f64>,
    pub noise: f64,
}

impl QuadraticTerm {
    pub fn new(a: Matrix, b: Vec<f64>, noise: f64) -> Result<Self> {
        if b.len() != a.rows() {
            return Err(Error::LengthMismatch {
                what: "quadratic offset b",
                expected: a.rows(),
                found: b.len(),
            });
        }
        if !(noise.is_finite() && noise >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "noise",
                reason: "must be finite and non-negative",
            });
        }
        Ok(Self { a, b, noise })
    }
}

#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    terms: Vec<QuadraticTerm>,
    optimum: Option<Vec<f64>>,
    dim: usize,
    scale: u32,
}

impl QuadraticProblem {
    pub fn new(terms: Vec<QuadraticTerm>, optimum: Option<Vec<f64>>) -> Result<Self> {
        let dim = terms.first().ok_or(Error::Empty { what: "quadratic terms" })?.a.cols();
        for t in &terms {
            if t.a.cols() != dim {
                return Err(Error::LengthMismatch {
                    what: "quadratic matrix columns",
                    expected: dim,
                    found: t.a.cols(),
                });
            }
        }
        if let Some(x) = &optimum {
            super::check_dim(x, dim)?;
        }
        Ok(Self {
            terms,
            optimum,
            dim,
            scale: 0,
        })
    }

    /// Random terms with Gaussian `A_i` (rows x dim, rows >= dim) scaled by
    /// `loss_scales[i]` (default 1). With `shared_optimum`, every `b_i` is
    /// `A_i x*` for one random `x*`; otherwise each `b_i` is random.
    pub fn random(
        dim: usize,
        losses: usize,
        rows: usize,
        noise: f64,
        shared_optimum: bool,
        loss_scales: &[f64],
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        if dim == 0 || losses == 0 {
            return Err(Error::Empty { what: "quadratic problem" });
        }
        if rows < dim {
            return Err(Error::InvalidParameter {
                name: "rows",
                reason: "must be at least the parameter dimension",
            });
        }
        if !loss_scales.is_empty() && loss_scales.len() != losses {
            return Err(Error::LengthMismatch {
                what: "loss scales",
                expected: losses,
                found: loss_scales.len(),
            });
        }
        let mut gauss = || -> f64 { StandardNormal.sample(&mut *rng) };
        let x_star: Vec<f64> = (0..dim).map(|_| gauss()).collect();
        let mut terms = Vec::with_capacity(losses);
        for i in 0..losses {
            let s = loss_scales.get(i).copied().unwrap_or(1.0);
            // identity block keeps every term well conditioned
            let data = (0..rows * dim)
                .map(|k| {
                    let eye = if k / dim == k % dim { 1.0 } else { 0.0 };
                    s * (eye + 0.3 * gauss() / libm::sqrt(rows as f64))
                })
                .collect();
            let a = Matrix::new(rows, dim, data)?;
            let b = if shared_optimum {
                a.mul_vec(&x_star)
            } else {
                (0..rows).map(|_| s * gauss()).collect()
            };
            terms.push(QuadraticTerm::new(a, b, noise)?);
        }
        Self::new(terms, shared_optimum.then_some(x_star))
    }

    pub fn terms(&self) -> &[QuadraticTerm] {
        &self.terms
    }
}

impl Problem for QuadraticProblem {
    fn name(&self) -> &'static str {
        "quadratic"
    }

    fn parameter_dim(&self) -> usize {
        self.dim
    }

    fn loss_count(&self) -> usize {
        self.terms.len()
    }

    fn loss_labels(&self) -> Vec<LossLabel> {
        (0..self.terms.len())
            .map(|i| LossLabel::new(&format!("q{i}"), self.scale))
            .collect()
    }

    fn evaluate(&self, params: &[f64], step: u64, rng: &mut dyn RngCore) -> Result<LossObservation> {
        super::check_dim(params, self.dim)?;
        let mut losses = Vec::with_capacity(self.terms.len());
        let mut grads = Vec::with_capacity(self.terms.len());
        for term in &self.terms {
            let residual: Vec<f64> = term
                .a
                .mul_vec(params)
                .iter()
                .zip(&term.b)
                .map(|(ax, b)| ax - b)
                .collect();
            let mut loss = crate::linalg::dot(&residual, &residual);
            if term.noise > 0.0 {
                let z: f64 = StandardNormal.sample(&mut *rng);
                loss += term.noise * z.abs();
            }
            losses.push(loss);
            let mut g = term.a.transpose_mul_vec(&residual);
            g.iter_mut().for_each(|v| *v *= 2.0);
            grads.push(g);
        }
        LossObservation::new(losses, Some(grads), step)
    }

    fn optimum(&self) -> Option<&[f64]> {
        self.optimum.as_deref()
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![0.0; self.dim]
    }

    /// Rows of every `A_i` and `b_i` averaged in blocks of `2^scale`.
    fn downscaled(&self, scale: u32) -> Result<Box<dyn Problem>> {
        let factor = 1usize << scale;
        let terms = self
            .terms
            .iter()
            .map(|t| QuadraticTerm::new(t.a.pool_rows(factor), pool_vec(&t.b, factor), t.noise))
            .collect::<Result<Vec<_>>>()?;
        Ok(Box::new(Self {
            terms,
            scale,
            ..self.clone()
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::testing::{assert_gradients_match, seeded};
    use crate::problem::ProblemSpec;

    #[test]
    fn identity_quadratic() {
        let term = QuadraticTerm::new(Matrix::identity(2), vec![0.0, 0.0], 0.0).unwrap();
        let p = QuadraticProblem::new(vec![term], None).unwrap();
        let obs = p.evaluate(&[1.0, 0.0], 1, &mut seeded(0)).unwrap();
        assert_eq!(obs.losses, vec![1.0]);
        assert_eq!(obs.gradients.unwrap()[0], vec![2.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(QuadraticTerm::new(Matrix::identity(2), vec![0.0], 0.0).is_err());
        let t2 = QuadraticTerm::new(Matrix::identity(2), vec![0.0; 2], 0.0).unwrap();
        let t3 = QuadraticTerm::new(Matrix::identity(3), vec![0.0; 3], 0.0).unwrap();
        assert!(QuadraticProblem::new(vec![t2.clone(), t3], None).is_err());
        let p = QuadraticProblem::new(vec![t2], None).unwrap();
        assert!(p.evaluate(&[1.0], 1, &mut seeded(0)).is_err());
    }

    #[test]
    fn scaled_pair_has_proportional_losses() {
        let spec = ProblemSpec::scaled_identity_pair(vec![1.0, -2.0], 10.0, 0.0).unwrap();
        let p = spec.build().unwrap();
        let obs = p.evaluate(&[0.3, 0.7], 1, &mut seeded(0)).unwrap();
        assert!((obs.losses[1] - 100.0 * obs.losses[0]).abs() < 1e-12 * obs.losses[1]);
    }

    #[test]
    fn noise_touches_values_not_gradients() {
        let mut rng = seeded(4);
        let noisy = QuadraticProblem::random(3, 2, 5, 0.5, true, &[], &mut rng).unwrap();
        let mut clean = noisy.clone();
        clean.terms.iter_mut().for_each(|t| t.noise = 0.0);
        let x = [0.1, 0.2, 0.3];
        let a = noisy.evaluate(&x, 1, &mut seeded(1)).unwrap();
        let b = clean.evaluate(&x, 1, &mut seeded(1)).unwrap();
        assert_eq!(a.gradients, b.gradients);
        assert!(a.losses.iter().zip(&b.losses).all(|(n, c)| n >= c));
        assert!(a.losses != b.losses);
    }

    #[test]
    fn shared_optimum_zeroes_every_gradient() {
        let p = QuadraticProblem::random(4, 3, 6, 0.0, true, &[1.0, 3.0, 0.5], &mut seeded(9)).unwrap();
        let x_star = p.optimum().unwrap().to_vec();
        let obs = p.evaluate(&x_star, 1, &mut seeded(0)).unwrap();
        for g in obs.gradients.unwrap() {
            assert!(crate::linalg::norm(&g) < 1e-12);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let p = QuadraticProblem::random(5, 3, 7, 0.1, false, &[], &mut seeded(2)).unwrap();
        assert_gradients_match(&p, 20, 3);
        assert_gradients_match(p.downscaled(2).unwrap().as_ref(), 20, 4);
    }
}
