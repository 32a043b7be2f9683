//! A toy stereo pair with the four-loss structure of photometric depth
//! training: reconstruction (L1 and DSSIM), left-right consistency and a
//! smoothness term, evaluated for both the left and the right prediction.
//!
//! Parameters are the two predicted images stacked `[left, right]`. The
//! right target is the left target shifted by `disparity` columns, so the
//! consistency term compares each prediction with the other one warped by
//! the same shift.
//!
//! At pyramid level `s` the reconstruction losses compare the prediction,
//! average-pooled by `2^s` and upsampled back, with the full-resolution
//! target; consistency and smoothness are computed on the pooled images.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;

use super::image::{global_ssim_grad, l1_loss, shift_rows, Image, ImageNoise, Pooling};
use super::{LossLabel, Problem};
use crate::error::{Error, Result};
use crate::weights::LossObservation;

const LOSS_NAMES: [&str; 4] = ["l1", "dssim", "lr", "disp"];
const SIDES: [&str; 2] = ["left", "right"];

#[derive(Debug, Clone)]
pub struct StereoPairProblem {
    targets: [Image; 2],
    disparity: usize,
    noise: ImageNoise,
    scale: u32,
    pooling: Pooling,
    clean_targets: Vec<f64>,
}

impl StereoPairProblem {
    pub fn new(left: Image, disparity: usize, noise: ImageNoise) -> Result<Self> {
        if left.width() < 8 || left.height() < 8 {
            return Err(Error::InvalidParameter {
                name: "stereo image",
                reason: "must be at least 8x8",
            });
        }
        if disparity >= left.width() {
            return Err(Error::InvalidParameter {
                name: "disparity",
                reason: "must be smaller than the image width",
            });
        }
        left.check_unit_range()?;
        noise.validate()?;
        let right = left.shifted(disparity as isize);
        let mut clean_targets = left.pixels().to_vec();
        clean_targets.extend_from_slice(right.pixels());
        let pooling = Pooling::new(left.width(), left.height(), 1)?;
        Ok(Self {
            targets: [left, right],
            disparity,
            noise,
            scale: 0,
            pooling,
            clean_targets,
        })
    }

    fn pixels(&self) -> usize {
        self.targets[0].pixels().len()
    }

    /// Shift that maps side `other`'s image onto side `this`.
    fn warp_offset(&self, this: usize) -> isize {
        let d = self.disparity as isize;
        if this == 0 {
            -d
        } else {
            d
        }
    }
}

/// Mean squared difference of horizontally and vertically adjacent pixels.
fn smoothness(x: &[f64], width: usize, height: usize) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; x.len()];
    let pairs = height * width.saturating_sub(1) + width * height.saturating_sub(1);
    if pairs == 0 {
        return (0.0, grad);
    }
    let inv = 1.0 / pairs as f64;
    let mut value = 0.0;
    let mut visit = |a: usize, b: usize| {
        let d = x[b] - x[a];
        value += d * d;
        grad[b] += 2.0 * d * inv;
        grad[a] -= 2.0 * d * inv;
    };
    for y in 0..height {
        for xx in 0..width {
            let i = y * width + xx;
            if xx + 1 < width {
                visit(i, i + 1);
            }
            if y + 1 < height {
                visit(i, i + width);
            }
        }
    }
    (value * inv, grad)
}

impl Problem for StereoPairProblem {
    fn name(&self) -> &'static str {
        "stereo"
    }

    fn parameter_dim(&self) -> usize {
        2 * self.pixels()
    }

    fn loss_count(&self) -> usize {
        8
    }

    fn loss_labels(&self) -> Vec<LossLabel> {
        SIDES
            .iter()
            .flat_map(|side| {
                LOSS_NAMES
                    .iter()
                    .map(move |loss| LossLabel::new(&format!("{loss}_{side}"), self.scale))
            })
            .collect()
    }

    fn evaluate(&self, params: &[f64], step: u64, rng: &mut dyn RngCore) -> Result<LossObservation> {
        super::check_dim(params, self.parameter_dim())?;
        let n = self.pixels();
        let width = self.targets[0].width();
        let (ow, oh) = (self.pooling.out_width(), self.pooling.out_height());
        let mut losses = Vec::with_capacity(8);
        let mut grads = Vec::with_capacity(8);
        for side in 0..2 {
            let other = 1 - side;
            let this_px = &params[side * n..(side + 1) * n];
            let other_px = &params[other * n..(other + 1) * n];
            let target = self.noise.apply(&self.targets[side], rng);
            let offset = self.warp_offset(side);
            let mut warped = vec![0.0; n];
            shift_rows(other_px, &mut warped, width, offset);

            // reconstruction compares the coarse prediction, upsampled back to
            // full resolution, with the full-resolution target
            let coarse = self.pooling.blur(this_px);
            let (l1, g_l1) = l1_loss(&coarse, &target);
            let (ssim, g_ssim) = global_ssim_grad(&coarse, &target);
            let g_dssim: Vec<f64> = g_ssim.iter().map(|g| -0.5 * g).collect();

            let x = self.pooling.forward(this_px);
            let w = self.pooling.forward(&warped);
            let m = x.len() as f64;
            let diff: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a - b).collect();
            let lr = diff.iter().map(|d| d * d).sum::<f64>() / m;
            let g_lr: Vec<f64> = diff.iter().map(|d| 2.0 * d / m).collect();
            let (disp, g_disp) = smoothness(&x, ow, oh);

            losses.extend([l1, 0.5 * (1.0 - ssim), lr, disp]);
            for full in [g_l1, g_dssim] {
                let mut g = vec![0.0; 2 * n];
                g[side * n..(side + 1) * n].copy_from_slice(&self.pooling.blur(&full));
                grads.push(g);
            }

            let mut g = vec![0.0; 2 * n];
            self.pooling.backward_add(&g_lr, &mut g[side * n..(side + 1) * n]);
            // consistency also pulls on the other prediction through the warp
            let neg: Vec<f64> = g_lr.iter().map(|v| -v).collect();
            let mut back = vec![0.0; n];
            self.pooling.backward_add(&neg, &mut back);
            let mut unwarped = vec![0.0; n];
            shift_rows(&back, &mut unwarped, width, -offset);
            for (dst, v) in g[other * n..(other + 1) * n].iter_mut().zip(&unwarped) {
                *dst += v;
            }
            grads.push(g);

            let mut g = vec![0.0; 2 * n];
            self.pooling.backward_add(&g_disp, &mut g[side * n..(side + 1) * n]);
            grads.push(g);
        }
        LossObservation::new(losses, Some(grads), step)
    }

    fn optimum(&self) -> Option<&[f64]> {
        None
    }

    /// Mid-grey with a faint ramp, horizontal on the left image and
    /// vertical on the right, so consistency and smoothness start positive.
    fn initial_point(&self) -> Vec<f64> {
        let (w, h) = (self.targets[0].width(), self.targets[0].height());
        let ramp = |i: usize, n: usize| 0.5 + 0.02 * (i as f64 / (n - 1) as f64 - 0.5);
        let left = (0..w * h).map(|i| ramp(i % w, w));
        let right = (0..w * h).map(|i| ramp(i / w, h));
        left.chain(right).collect()
    }

    fn attenuated_losses(&self) -> Vec<bool> {
        (0..8).map(|i| LOSS_NAMES[i % 4] == "disp").collect()
    }

    fn downscaled(&self, scale: u32) -> Result<Box<dyn Problem>> {
        let pooling = Pooling::new(self.targets[0].width(), self.targets[0].height(), 1 << scale)?;
        Ok(Box::new(Self {
            scale,
            pooling,
            ..self.clone()
        }))
    }
}

impl StereoPairProblem {
    /// Noise-free stacked targets `[left, right]`.
    pub fn targets(&self) -> &[f64] {
        &self.clean_targets
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::testing::{assert_gradients_match, seeded};

    #[test]
    fn eight_labelled_losses() {
        let p = StereoPairProblem::new(Image::synthetic(8, 8), 1, ImageNoise::default()).unwrap();
        let names: Vec<_> = p.loss_labels().into_iter().map(|l| l.name).collect();
        assert_eq!(names[0], "l1_left");
        assert_eq!(names[7], "disp_right");
        assert_eq!(p.attenuated_losses().iter().filter(|a| **a).count(), 2);
    }

    #[test]
    fn targets_are_consistent() {
        let p = StereoPairProblem::new(Image::synthetic(8, 8), 2, ImageNoise::default()).unwrap();
        let obs = p.evaluate(p.targets(), 1, &mut seeded(0)).unwrap();
        for side in 0..2 {
            assert_eq!(obs.losses[side * 4], 0.0);
            assert!(obs.losses[side * 4 + 1].abs() < 1e-15);
            assert!(obs.losses[side * 4 + 2].abs() < 1e-30);
        }
    }

    #[test]
    fn smoothness_of_a_ramp() {
        // horizontal steps of 1, vertical steps of 0
        let x = [0.0, 1.0, 0.0, 1.0];
        let (v, g) = smoothness(&x, 2, 2);
        assert_eq!(v, 0.5);
        assert_eq!(g, vec![-0.5, 0.5, -0.5, 0.5]);
        assert_eq!(smoothness(&[3.0], 1, 1).0, 0.0);
    }

    #[test]
    fn every_loss_starts_positive() {
        let p = StereoPairProblem::new(Image::synthetic(16, 16), 2, ImageNoise::default()).unwrap();
        for s in 0..4 {
            let level = p.downscaled(s).unwrap();
            let obs = level.evaluate(&level.initial_point(), 1, &mut seeded(0)).unwrap();
            assert!(obs.losses.iter().all(|l| *l > 0.0), "scale {s}: {:?}", obs.losses);
        }
    }

    #[test]
    fn invalid_setup() {
        assert!(StereoPairProblem::new(Image::synthetic(8, 8), 8, ImageNoise::default()).is_err());
        assert!(StereoPairProblem::new(Image::synthetic(4, 8), 1, ImageNoise::default()).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let noise = ImageNoise { pixel: 0.02, detail: 0.05 };
        let p = StereoPairProblem::new(Image::synthetic(8, 8), 1, noise).unwrap();
        assert_gradients_match(&p, 5, 21);
        assert_gradients_match(p.downscaled(2).unwrap().as_ref(), 5, 22);
    }
}
