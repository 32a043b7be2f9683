//! GradNorm in its closed form: the weight of a loss is proportional to its
//! relative training rate `L_i(t) / L_i(0)` divided by its gradient norm,
//! raised to a temperature before normalization.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg;
use crate::weights::{equal_weights, LossObservation, WeightVector};

pub const DEFAULT_TEMPERATURE: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradNormConfig {
    temperature: f64,
    initial_losses: Vec<f64>,
}

impl GradNormConfig {
    pub fn new(temperature: f64, initial_losses: Vec<f64>) -> Result<Self> {
        check_temperature(temperature)?;
        if initial_losses.is_empty() {
            return Err(Error::Empty { what: "initial losses" });
        }
        if let Some((index, &value)) = initial_losses
            .iter()
            .enumerate()
            .find(|(_, l)| !(l.is_finite() && **l > 0.0))
        {
            return Err(Error::NonPositiveLoss { index, value });
        }
        Ok(Self {
            temperature,
            initial_losses,
        })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn initial_losses(&self) -> &[f64] {
        &self.initial_losses
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "temperature",
            reason: "must be finite and positive",
        })
    }
}

pub fn gradnorm_weights(
    losses: &[f64],
    config: &GradNormConfig,
    grad_norms: &[f64],
) -> Result<WeightVector> {
    let n = config.initial_losses.len();
    for (what, found) in [("loss list", losses.len()), ("gradient norms", grad_norms.len())] {
        if found != n {
            return Err(Error::LengthMismatch {
                what,
                expected: n,
                found,
            });
        }
    }
    let mut scores = Vec::with_capacity(n);
    for (index, ((&loss, &initial), &g)) in losses
        .iter()
        .zip(&config.initial_losses)
        .zip(grad_norms)
        .enumerate()
    {
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { index, value: loss });
        }
        if loss < 0.0 {
            return Err(Error::NegativeLoss { index, value: loss });
        }
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::ZeroGradientNorm { index });
        }
        let raw = (loss / initial) / g;
        scores.push(libm::pow(raw, config.temperature));
    }
    WeightVector::normalize(scores)
}

/// Captures `L_i(0)` on the first observation, then emits closed-form
/// GradNorm weights from the per-loss gradient norms.
#[derive(Debug, Clone, PartialEq)]
pub struct GradNormState {
    temperature: f64,
    config: Option<GradNormConfig>,
}

impl GradNormState {
    pub fn new(temperature: f64) -> Result<Self> {
        check_temperature(temperature)?;
        Ok(Self {
            temperature,
            config: None,
        })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn config(&self) -> Option<&GradNormConfig> {
        self.config.as_ref()
    }

    pub fn observe(&mut self, obs: &LossObservation) -> Result<WeightVector> {
        let grads = obs
            .gradients
            .as_ref()
            .ok_or(Error::GradientsRequired { strategy: "gradnorm" })?;
        match &self.config {
            None => {
                self.config = Some(GradNormConfig::new(self.temperature, obs.losses.clone())?);
                equal_weights(obs.losses.len())
            }
            Some(config) => {
                let norms: Vec<f64> = grads.iter().map(|g| linalg::norm(g)).collect();
                gradnorm_weights(&obs.losses, config, &norms)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn documented_examples() {
        let cfg = GradNormConfig::new(1.0, vec![1.0, 1.0]).unwrap();
        let w = gradnorm_weights(&[0.5, 1.0], &cfg, &[2.0, 1.0]).unwrap();
        assert!(close(w.as_slice(), &[0.2, 0.8], 1e-12));

        let cfg = GradNormConfig::new(1.5, vec![1.0, 1.0]).unwrap();
        let w = gradnorm_weights(&[0.25, 1.0], &cfg, &[1.0, 1.0]).unwrap();
        assert!(close(w.as_slice(), &[1.0 / 9.0, 8.0 / 9.0], 1e-12));

        for t in [0.5, 1.0, 1.5, 3.0] {
            let cfg = GradNormConfig::new(t, vec![2.0; 3]).unwrap();
            let w = gradnorm_weights(&[1.3; 3], &cfg, &[0.7; 3]).unwrap();
            assert!(close(w.as_slice(), &[1.0 / 3.0; 3], 1e-15));
        }
    }

    #[test]
    fn ratio_uses_initial_losses() {
        // L/L0 = [0.5, 1.0] reached through different absolute levels
        let cfg = GradNormConfig::new(1.0, vec![4.0, 0.1]).unwrap();
        let w = gradnorm_weights(&[2.0, 0.1], &cfg, &[2.0, 1.0]).unwrap();
        assert!(close(w.as_slice(), &[0.2, 0.8], 1e-12));
    }

    #[test]
    fn zero_gradient_norm_is_an_error() {
        let cfg = GradNormConfig::new(1.5, vec![1.0, 1.0]).unwrap();
        assert_eq!(
            gradnorm_weights(&[1.0, 1.0], &cfg, &[1.0, 0.0]),
            Err(Error::ZeroGradientNorm { index: 1 })
        );
    }

    #[test]
    fn invalid_configuration() {
        assert!(GradNormConfig::new(0.0, vec![1.0]).is_err());
        assert!(GradNormConfig::new(1.5, vec![0.0]).is_err());
        assert!(GradNormState::new(-1.0).is_err());
    }

    #[test]
    fn first_observation_captures_initial_losses() {
        let mut state = GradNormState::new(1.0).unwrap();
        let obs = LossObservation::new(vec![4.0, 1.0], Some(vec![vec![1.0, 0.0], vec![0.0, 1.0]]), 1).unwrap();
        assert_eq!(state.observe(&obs).unwrap().as_slice(), &[0.5, 0.5]);
        assert_eq!(state.config().unwrap().initial_losses(), &[4.0, 1.0]);

        let obs = LossObservation::new(vec![2.0, 1.0], Some(vec![vec![2.0, 0.0], vec![0.0, 1.0]]), 2).unwrap();
        assert!(close(state.observe(&obs).unwrap().as_slice(), &[0.2, 0.8], 1e-12));

        let no_grads = LossObservation::new(vec![2.0, 1.0], None, 3).unwrap();
        assert!(matches!(state.observe(&no_grads), Err(Error::GradientsRequired { .. })));
    }

    proptest! {
        #[test]
        fn larger_loss_ratio_means_larger_weight(
            ratios in proptest::collection::vec(0.01f64..10.0, 2..6),
            norms in proptest::collection::vec(0.01f64..10.0, 6),
            bump in 1.001f64..5.0,
            which in 0usize..6,
            t in 0.2f64..3.0,
        ) {
            let n = ratios.len();
            let which = which % n;
            let cfg = GradNormConfig::new(t, vec![1.0; n]).unwrap();
            let before = gradnorm_weights(&ratios, &cfg, &norms[..n]).unwrap();
            let mut bumped = ratios.clone();
            bumped[which] *= bump;
            let after = gradnorm_weights(&bumped, &cfg, &norms[..n]).unwrap();
            prop_assert!(after.as_slice()[which] > before.as_slice()[which]);
            prop_assert!((after.sum() - 1.0).abs() < 1e-9);
        }
    }
}
