use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LossLabel, Problem};
use crate::error::{Error, Result};
use crate::weights::LossObservation;

/// Sums a base problem over `scales` pyramid levels. Every base loss
/// appears once per level; the base's attenuated losses are multiplied by
/// `1 / 2^s` at level `s`.
///
/// All levels see the same random draw within a step, so stochastic
/// targets stay coherent across the pyramid.
#[derive(Debug)]
pub struct MultiScaleComposite {
    levels: Vec<Box<dyn Problem>>,
    attenuated: Vec<bool>,
    base_count: usize,
}

impl MultiScaleComposite {
    pub fn new(base: Box<dyn Problem>, scales: u32) -> Result<Self> {
        if scales == 0 {
            return Err(Error::InvalidParameter {
                name: "scales",
                reason: "must be at least 1",
            });
        }
        let attenuated = base.attenuated_losses();
        let base_count = base.loss_count();
        let mut levels = Vec::with_capacity(scales as usize);
        for s in 1..scales {
            levels.push(base.downscaled(s)?);
        }
        levels.insert(0, base);
        Ok(Self {
            levels,
            attenuated,
            base_count,
        })
    }

    pub fn scale_count(&self) -> usize {
        self.levels.len()
    }

    /// Multiplier applied to loss `k` of the base at level `s`.
    pub fn factor(&self, k: usize, s: usize) -> f64 {
        if self.attenuated[k] {
            1.0 / (1u64 << s) as f64
        } else {
            1.0
        }
    }
}

impl Problem for MultiScaleComposite {
    fn name(&self) -> &'static str {
        "multiscale"
    }

    fn parameter_dim(&self) -> usize {
        self.levels[0].parameter_dim()
    }

    fn loss_count(&self) -> usize {
        self.base_count * self.levels.len()
    }

    fn loss_labels(&self) -> Vec<LossLabel> {
        self.levels
            .iter()
            .enumerate()
            .flat_map(|(s, level)| {
                level
                    .loss_labels()
                    .into_iter()
                    .map(move |l| LossLabel::new(&format!("{}_s{s}", l.name), s as u32))
            })
            .collect()
    }

    fn supports_gradients(&self) -> bool {
        self.levels[0].supports_gradients()
    }

    fn evaluate(&self, params: &[f64], step: u64, rng: &mut dyn RngCore) -> Result<LossObservation> {
        let seed = rng.next_u64();
        let mut losses = Vec::with_capacity(self.loss_count());
        let mut grads = self.supports_gradients().then(|| Vec::with_capacity(self.loss_count()));
        for (s, level) in self.levels.iter().enumerate() {
            let obs = level.evaluate(params, step, &mut ChaCha8Rng::seed_from_u64(seed))?;
            for (k, loss) in obs.losses.iter().enumerate() {
                losses.push(loss * self.factor(k, s));
            }
            if let (Some(out), Some(level_grads)) = (grads.as_mut(), obs.gradients) {
                for (k, mut g) in level_grads.into_iter().enumerate() {
                    let f = self.factor(k, s);
                    if f != 1.0 {
                        g.iter_mut().for_each(|v| *v *= f);
                    }
                    out.push(g);
                }
            }
        }
        LossObservation::new(losses, grads, step)
    }

    /// The base optimum, when every level shares it.
    fn optimum(&self) -> Option<&[f64]> {
        let first = self.levels[0].optimum()?;
        self.levels[1..]
            .iter()
            .all(|l| l.optimum() == Some(first))
            .then_some(first)
    }

    fn initial_point(&self) -> Vec<f64> {
        self.levels[0].initial_point()
    }
}
