//! Min-norm point in the convex hull of per-loss gradients (MGDA).
//!
//! The coefficients `alpha` minimizing `|sum_i alpha_i g_i|^2` over the
//! simplex are Pareto-stationary weights. Two gradients have a closed
//! form; more are handled with pairwise Frank-Wolfe on the Gram matrix,
//! started from the best two-gradient solution.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::weights::{equal_weights, WeightVector};

pub const MAX_ITERATIONS: usize = 250;
/// Stop once the pairwise duality gap falls below this, relative to the
/// largest squared gradient norm.
pub const GAP_TOLERANCE: f64 = 1e-10;

/// Minimizer of `|gamma u + (1 - gamma) v|^2` over `gamma` in `[0, 1]`,
/// from the Gram entries `u.u`, `u.v`, `v.v`.
pub fn two_point_min_norm(uu: f64, uv: f64, vv: f64) -> f64 {
    let denom = uu + vv - 2.0 * uv;
    if denom <= 0.0 {
        return 0.5;
    }
    ((vv - uv) / denom).clamp(0.0, 1.0)
}

/// Symmetric Gram matrix `G[i][j] = g_i . g_j`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Gram {
    n: usize,
    entries: Vec<f64>,
}

impl Gram {
    pub fn from_gradients(gradients: &[Vec<f64>]) -> Self {
        let n = gradients.len();
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = dot(&gradients[i], &gradients[j]);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Self { n, entries }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// `alpha^T G alpha`, the squared norm of the combination.
    pub fn quadratic_form(&self, alpha: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| alpha[i] * (0..self.n).map(|j| self.get(i, j) * alpha[j]).sum::<f64>())
            .sum()
    }

    fn mul(&self, alpha: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * alpha[j]).sum())
            .collect()
    }
}

/// Pairwise Frank-Wolfe on the simplex, starting at `start`.
///
/// Each iteration moves mass from the active vertex with the largest
/// gradient to the vertex with the smallest, with an exact line search.
pub fn frank_wolfe_min_norm(gram: &Gram, start: &[f64], max_iterations: usize) -> Vec<f64> {
    let n = gram.len();
    let mut alpha = start.to_vec();
    let mut g_alpha = gram.mul(&alpha);
    let scale = (0..n).map(|i| gram.get(i, i)).fold(0.0, f64::max);
    if scale == 0.0 {
        return alpha;
    }
    for _ in 0..max_iterations {
        let toward = argmin(&g_alpha);
        let away = (0..n)
            .filter(|&i| alpha[i] > 0.0)
            .max_by(|&a, &b| g_alpha[a].total_cmp(&g_alpha[b]))
            .expect("simplex point has a positive entry");
        let gap = g_alpha[away] - g_alpha[toward];
        if toward == away || gap <= GAP_TOLERANCE * scale {
            break;
        }
        let curvature = gram.get(toward, toward) + gram.get(away, away) - 2.0 * gram.get(toward, away);
        let max_step = alpha[away];
        let step = if curvature > 0.0 {
            (gap / curvature).min(max_step)
        } else {
            max_step
        };
        if step <= 0.0 {
            break;
        }
        alpha[toward] += step;
        alpha[away] -= step;
        if alpha[away] < 1e-300 || step == max_step {
            alpha[away] = 0.0;
        }
        for (i, ga) in g_alpha.iter_mut().enumerate() {
            *ga += step * (gram.get(i, toward) - gram.get(i, away));
        }
    }
    alpha
}

fn argmin(v: &[f64]) -> usize {
    (0..v.len())
        .min_by(|&a, &b| v[a].total_cmp(&v[b]))
        .expect("non-empty")
}

/// Best solution restricted to a single pair of gradients.
fn best_pair(gram: &Gram) -> Vec<f64> {
    let n = gram.len();
    let mut best = (f64::INFINITY, vec![0.0; n]);
    for i in 0..n {
        for j in (i + 1)..n {
            let gamma = two_point_min_norm(gram.get(i, i), gram.get(i, j), gram.get(j, j));
            let value = gamma * gamma * gram.get(i, i)
                + 2.0 * gamma * (1.0 - gamma) * gram.get(i, j)
                + (1.0 - gamma) * (1.0 - gamma) * gram.get(j, j);
            if value < best.0 {
                let mut alpha = vec![0.0; n];
                alpha[i] = gamma;
                alpha[j] = 1.0 - gamma;
                best = (value, alpha);
            }
        }
    }
    best.1
}

pub fn mgda_weights(gradients: &[Vec<f64>]) -> Result<WeightVector> {
    let first = gradients.first().ok_or(Error::Empty { what: "gradient list" })?;
    let dim = first.len();
    for g in gradients {
        if g.len() != dim {
            return Err(Error::LengthMismatch {
                what: "gradient vector",
                expected: dim,
                found: g.len(),
            });
        }
        if let Some(index) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { index });
        }
    }
    let n = gradients.len();
    if n == 1 {
        return WeightVector::normalize(vec![1.0]);
    }
    if gradients.iter().all(|g| g == first) {
        return equal_weights(n);
    }
    let gram = Gram::from_gradients(gradients);
    let alpha = if n == 2 {
        let gamma = two_point_min_norm(gram.get(0, 0), gram.get(0, 1), gram.get(1, 1));
        vec![gamma, 1.0 - gamma]
    } else {
        frank_wolfe_min_norm(&gram, &best_pair(&gram), MAX_ITERATIONS)
    };
    WeightVector::normalize(alpha.into_iter().map(|a| a.max(0.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm;

    fn combine(gradients: &[Vec<f64>], alpha: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; gradients[0].len()];
        for (g, a) in gradients.iter().zip(alpha) {
            crate::linalg::axpy(&mut out, *a, g);
        }
        out
    }

    #[test]
    fn orthogonal_unit_gradients() {
        let grads = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let w = mgda_weights(&grads).unwrap();
        assert_eq!(w.as_slice(), &[0.5, 0.5]);
        assert_eq!(combine(&grads, w.as_slice()), vec![0.5, 0.5]);
    }

    #[test]
    fn shorter_parallel_gradient_wins() {
        let w = mgda_weights(&[vec![1.0, 0.0], vec![2.0, 0.0]]).unwrap();
        assert_eq!(w.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(mgda_weights(&[vec![3.0, -1.0]]).unwrap().as_slice(), &[1.0]);
        let same = vec![vec![1.0, 2.0]; 3];
        assert_eq!(mgda_weights(&same).unwrap().as_slice(), &[1.0 / 3.0; 3]);
        assert!(mgda_weights(&[]).is_err());
        assert!(mgda_weights(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(mgda_weights(&[vec![f64::NAN], vec![1.0]]).is_err());
    }

    #[test]
    fn three_gradients_spanning_origin_reach_zero() {
        let grads = vec![vec![1.0, 0.0], vec![-0.5, 0.8], vec![-0.5, -0.8]];
        let w = mgda_weights(&grads).unwrap();
        assert!(norm(&combine(&grads, w.as_slice())) < 1e-6);
    }

    #[test]
    fn frank_wolfe_matches_closed_form_for_two_gradients() {
        let grads = vec![vec![3.0, 1.0, -2.0], vec![-1.0, 0.5, 0.25]];
        let gram = Gram::from_gradients(&grads);
        let fw = frank_wolfe_min_norm(&gram, &[0.5, 0.5], MAX_ITERATIONS);
        let gamma = two_point_min_norm(gram.get(0, 0), gram.get(0, 1), gram.get(1, 1));
        assert!((fw[0] - gamma).abs() < 1e-12);
        assert!((fw[1] - (1.0 - gamma)).abs() < 1e-12);
    }
}
