//! Grayscale images, block pooling and single-window SSIM.

use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::{LossLabel, Problem};
use crate::error::{Error, Result};
use crate::weights::LossObservation;

pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

/// Row-major grayscale image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Empty { what: "image" });
        }
        if pixels.len() != width * height {
            return Err(Error::LengthMismatch {
                what: "image pixels",
                expected: width * height,
                found: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    /// Smooth synthetic scene: a diagonal ramp with a bright disc.
    pub fn synthetic(width: usize, height: usize) -> Self {
        let (cx, cy) = (0.6 * width as f64, 0.4 * height as f64);
        let radius = 0.25 * width.min(height) as f64;
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let ramp = 0.15 + 0.5 * (x + y) as f64 / (width + height) as f64;
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                let disc = if dx * dx + dy * dy <= radius * radius { 0.3 } else { 0.0 };
                pixels.push(ramp + disc);
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn check_unit_range(&self) -> Result<()> {
        match self
            .pixels
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            Some((index, &value)) => Err(Error::PixelOutOfRange { index, value }),
            None => Ok(()),
        }
    }

    /// Circular horizontal shift: `out[y][x] = in[y][x - offset]`.
    pub fn shifted(&self, offset: isize) -> Self {
        let mut out = self.clone();
        shift_rows(&self.pixels, &mut out.pixels, self.width, offset);
        out
    }
}

pub(crate) fn shift_rows(src: &[f64], dst: &mut [f64], width: usize, offset: isize) {
    let w = width as isize;
    for (s_row, d_row) in src.chunks(width).zip(dst.chunks_mut(width)) {
        for x in 0..w {
            d_row[x as usize] = s_row[(x - offset).rem_euclid(w) as usize];
        }
    }
}

/// Shape of a `factor x factor` average-pooling of a `width x height` grid.
/// Trailing rows and columns that do not fill a block are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pooling {
    pub width: usize,
    pub height: usize,
    pub factor: usize,
}

impl Pooling {
    pub fn new(width: usize, height: usize, factor: usize) -> Result<Self> {
        let factor = factor.max(1);
        if width < factor || height < factor {
            return Err(Error::InvalidParameter {
                name: "scale",
                reason: "image is too small for this many pooling levels",
            });
        }
        Ok(Self {
            width,
            height,
            factor,
        })
    }

    pub fn out_width(&self) -> usize {
        self.width / self.factor
    }

    pub fn out_height(&self) -> usize {
        self.height / self.factor
    }

    pub fn out_len(&self) -> usize {
        self.out_width() * self.out_height()
    }

    pub fn forward(&self, src: &[f64]) -> Vec<f64> {
        if self.factor == 1 {
            return src.to_vec();
        }
        let (ow, oh, k) = (self.out_width(), self.out_height(), self.factor);
        let inv = 1.0 / (k * k) as f64;
        let mut out = vec![0.0; ow * oh];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0;
                for y in oy * k..(oy + 1) * k {
                    let row = &src[y * self.width..];
                    acc += row[ox * k..(ox + 1) * k].iter().sum::<f64>();
                }
                out[oy * ow + ox] = acc * inv;
            }
        }
        out
    }

    /// Replaces every full block by its mean, keeping the full resolution.
    /// Pixels in the trailing partial blocks pass through unchanged. The
    /// operator is an orthogonal projection, so it is its own adjoint.
    pub fn blur(&self, src: &[f64]) -> Vec<f64> {
        let mut out = src.to_vec();
        if self.factor == 1 {
            return out;
        }
        let pooled = self.forward(src);
        let k = self.factor;
        for (j, mean) in pooled.iter().enumerate() {
            let (ox, oy) = (j % self.out_width(), j / self.out_width());
            for y in oy * k..(oy + 1) * k {
                out[y * self.width + ox * k..y * self.width + (ox + 1) * k].fill(*mean);
            }
        }
        out
    }

    /// Adjoint of [`Pooling::forward`], accumulated into `dst`.
    pub fn backward_add(&self, grad: &[f64], dst: &mut [f64]) {
        let (ow, oh, k) = (self.out_width(), self.out_height(), self.factor);
        let inv = 1.0 / (k * k) as f64;
        for oy in 0..oh {
            for ox in 0..ow {
                let g = grad[oy * ow + ox] * inv;
                for y in oy * k..(oy + 1) * k {
                    for x in ox * k..(ox + 1) * k {
                        dst[y * self.width + x] += g;
                    }
                }
            }
        }
    }
}

/// Mean absolute difference and its gradient with respect to `x`.
pub fn l1_loss(x: &[f64], y: &[f64]) -> (f64, Vec<f64>) {
    let n = x.len() as f64;
    let mut value = 0.0;
    let grad = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let d = a - b;
            value += d.abs();
            if d > 0.0 {
                1.0 / n
            } else if d < 0.0 {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect();
    (value / n, grad)
}

/// SSIM computed over the whole image as a single window (population
/// statistics), with the usual stabilizing constants.
pub fn global_ssim(x: &[f64], y: &[f64]) -> f64 {
    SsimTerms::new(x, y).value()
}

/// SSIM and its gradient with respect to `x`.
pub fn global_ssim_grad(x: &[f64], y: &[f64]) -> (f64, Vec<f64>) {
    let t = SsimTerms::new(x, y);
    let n = x.len() as f64;
    let denom = t.b1 * t.b2;
    let value = t.a1 * t.a2 / denom;
    let grad = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let da1 = 2.0 * t.mu_y / n;
            let da2 = 2.0 * (yi - t.mu_y) / n;
            let db1 = 2.0 * t.mu_x / n;
            let db2 = 2.0 * (xi - t.mu_x) / n;
            let num = da1 * t.a2 + t.a1 * da2;
            let den = db1 * t.b2 + t.b1 * db2;
            (num * denom - t.a1 * t.a2 * den) / (denom * denom)
        })
        .collect();
    (value, grad)
}

struct SsimTerms {
    mu_x: f64,
    mu_y: f64,
    a1: f64,
    a2: f64,
    b1: f64,
    b2: f64,
}

impl SsimTerms {
    fn new(x: &[f64], y: &[f64]) -> Self {
        let n = x.len() as f64;
        let mu_x = x.iter().sum::<f64>() / n;
        let mu_y = y.iter().sum::<f64>() / n;
        let (mut var_x, mut var_y, mut cov) = (0.0, 0.0, 0.0);
        for (a, b) in x.iter().zip(y) {
            let (dx, dy) = (a - mu_x, b - mu_y);
            var_x += dx * dx;
            var_y += dy * dy;
            cov += dx * dy;
        }
        let (var_x, var_y, cov) = (var_x / n, var_y / n, cov / n);
        Self {
            mu_x,
            mu_y,
            a1: 2.0 * mu_x * mu_y + SSIM_C1,
            a2: 2.0 * cov + SSIM_C2,
            b1: mu_x * mu_x + mu_y * mu_y + SSIM_C1,
            b2: var_x + var_y + SSIM_C2,
        }
    }

    fn value(&self) -> f64 {
        self.a1 * self.a2 / (self.b1 * self.b2)
    }
}

/// Per-step stochastic perturbation of an image target.
///
/// `pixel` adds independent Gaussian noise to every pixel. `detail` adds a
/// pixel-level checkerboard with a random Gaussian amplitude per step: fine
/// texture that changes from step to step and vanishes under 2x2 pooling.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ImageNoise {
    pub pixel: f64,
    pub detail: f64,
}

impl ImageNoise {
    pub fn is_none(&self) -> bool {
        self.pixel == 0.0 && self.detail == 0.0
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if [self.pixel, self.detail].iter().all(|s| s.is_finite() && *s >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidParameter {
                name: "noise",
                reason: "must be finite and non-negative",
            })
        }
    }

    /// Draws a perturbed copy of `target`.
    pub(crate) fn apply(&self, target: &Image, rng: &mut dyn RngCore) -> Vec<f64> {
        let mut out = target.pixels.clone();
        if self.detail > 0.0 {
            let z: f64 = StandardNormal.sample(&mut *rng);
            let amp = self.detail * z;
            for y in 0..target.height {
                for x in 0..target.width {
                    let sign = if (x + y) % 2 == 0 { 1.0 } else { -1.0 };
                    out[y * target.width + x] += amp * sign;
                }
            }
        }
        if self.pixel > 0.0 {
            for v in &mut out {
                let z: f64 = StandardNormal.sample(&mut *rng);
                *v += self.pixel * z;
            }
        }
        out
    }
}

/// Fit an image directly (parameters are pixels) under mean-L1 and
/// DSSIM = (1 - SSIM) / 2.
///
/// At pyramid level `s` the prediction is average-pooled by `2^s` and
/// upsampled back before it is compared with the full-resolution target,
/// so coarse levels keep an error floor from the detail they cannot
/// represent.
#[derive(Debug, Clone)]
pub struct ImageFitProblem {
    target: Image,
    noise: ImageNoise,
    scale: u32,
    pooling: Pooling,
}

impl ImageFitProblem {
    pub fn new(target: Image, noise: ImageNoise) -> Result<Self> {
        if target.width < 8 || target.height < 8 {
            return Err(Error::InvalidParameter {
                name: "target image",
                reason: "must be at least 8x8",
            });
        }
        target.check_unit_range()?;
        noise.validate()?;
        let pooling = Pooling::new(target.width, target.height, 1)?;
        Ok(Self {
            target,
            noise,
            scale: 0,
            pooling,
        })
    }

    pub fn target(&self) -> &Image {
        &self.target
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }
}

impl Problem for ImageFitProblem {
    fn name(&self) -> &'static str {
        "image-fit"
    }

    fn parameter_dim(&self) -> usize {
        self.target.pixels.len()
    }

    fn loss_count(&self) -> usize {
        2
    }

    fn loss_labels(&self) -> Vec<LossLabel> {
        ["l1", "dssim"]
            .into_iter()
            .map(|n| LossLabel::new(n, self.scale))
            .collect()
    }

    fn evaluate(&self, params: &[f64], step: u64, rng: &mut dyn RngCore) -> Result<LossObservation> {
        super::check_dim(params, self.parameter_dim())?;
        let target = self.noise.apply(&self.target, rng);
        let x = self.pooling.blur(params);
        let (l1, g_l1) = l1_loss(&x, &target);
        let (ssim, g_ssim) = global_ssim_grad(&x, &target);
        let g_dssim: Vec<f64> = g_ssim.iter().map(|g| -0.5 * g).collect();
        let grads = vec![self.pooling.blur(&g_l1), self.pooling.blur(&g_dssim)];
        LossObservation::new(vec![l1, 0.5 * (1.0 - ssim)], Some(grads), step)
    }

    fn optimum(&self) -> Option<&[f64]> {
        (self.noise.is_none() && self.scale == 0).then_some(self.target.pixels())
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![0.5; self.parameter_dim()]
    }

    fn downscaled(&self, scale: u32) -> Result<alloc::boxed::Box<dyn Problem>> {
        let pooling = Pooling::new(self.target.width, self.target.height, 1 << scale)?;
        Ok(alloc::boxed::Box::new(Self {
            scale,
            pooling,
            ..self.clone()
        }))
    }
}
