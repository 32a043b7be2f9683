//! Training loop, per-run records, sweeps and win-rate comparison.

mod sweep;
mod winrate;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use sweep::{sweep, SweepAxis, SweepValue};
pub use winrate::{compute_win_rate, MetricDirection};

use crate::error::{Error, Result};
use crate::linalg::{axpy, distance};
use crate::optim::OptimizerSpec;
use crate::problem::{LossLabel, Problem, ProblemSpec};
use crate::strategy::{Strategy, StrategySpec};

/// Everything that determines one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub strategy: StrategySpec,
    pub optimizer: OptimizerSpec,
    pub iterations: u64,
    pub seed: u64,
    /// Keep one row every `record_every` steps, starting at step 1.
    pub record_every: u64,
}

impl RunConfig {
    pub fn new(problem: ProblemSpec, strategy: StrategySpec) -> Self {
        Self {
            problem,
            strategy,
            optimizer: OptimizerSpec::default(),
            iterations: 1000,
            seed: 0,
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter {
                name: "iterations",
                reason: "must be at least 1",
            });
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter {
                name: "record_every",
                reason: "must be at least 1",
            });
        }
        Ok(())
    }
}

/// One recorded step. Losses are the values the weights were computed
/// from; `dist_to_opt` is measured at the parameters that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub step: u64,
    pub losses: Vec<f64>,
    /// Weights rescaled to sum to one.
    pub weights: Vec<f64>,
    /// Weights as applied, for strategies whose weights are not normalized.
    pub raw_weights: Option<Vec<f64>>,
    pub objective: f64,
    pub dist_to_opt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config: RunConfig,
    pub labels: Vec<LossLabel>,
    pub rows: Vec<RunRow>,
    /// Steps that completed a parameter update.
    pub steps_completed: u64,
    /// Losses at the last evaluated step.
    pub final_losses: Vec<f64>,
    pub final_objective: f64,
    pub final_params: Vec<f64>,
    pub final_distance: Option<f64>,
    /// Why the run stopped early, if it did.
    pub abort_reason: Option<String>,
}

impl RunRecord {
    pub fn is_valid(&self) -> bool {
        self.abort_reason.is_none()
    }

    pub fn metric_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.labels.iter().map(|l| format!("loss_{}", l.name)).collect();
        if self.final_distance.is_some() {
            names.push("dist_to_opt".into());
        }
        names
    }

    /// Final losses followed by the distance to the optimum when known.
    /// An aborted run reports NaN for every metric.
    pub fn metrics(&self) -> Vec<f64> {
        let count = self.metric_names().len();
        if !self.is_valid() {
            return vec![f64::NAN; count];
        }
        let mut m = self.final_losses.clone();
        m.extend(self.final_distance);
        m
    }

    /// Every metric is a loss or a distance, so lower is better throughout.
    pub fn metric_directions(&self) -> Vec<MetricDirection> {
        vec![MetricDirection::LowerIsBetter; self.metric_names().len()]
    }

    pub fn scale_count(&self) -> usize {
        self.labels.iter().map(|l| l.scale as usize + 1).max().unwrap_or(0)
    }

    /// Normalized weight summed per scale and averaged over recorded rows.
    pub fn scale_weight_profile(&self) -> Vec<f64> {
        let mut profile = vec![0.0; self.scale_count()];
        if self.rows.is_empty() {
            return profile;
        }
        for row in &self.rows {
            for (w, label) in row.weights.iter().zip(&self.labels) {
                profile[label.scale as usize] += w;
            }
        }
        let n = self.rows.len() as f64;
        profile.iter_mut().for_each(|p| *p /= n);
        profile
    }

    /// Time-averaged weight on the coarser half of the scales
    /// (`s >= scales / 2`).
    pub fn coarse_weight_share(&self) -> f64 {
        let profile = self.scale_weight_profile();
        let first = profile.len() / 2;
        profile[first..].iter().sum()
    }
}

/// Runs one configuration to completion.
///
/// Configuration problems (a strategy that needs gradients on a
/// gradient-free problem, invalid hyperparameters) are returned as errors.
/// Failures during training, such as a non-finite loss, end the run early
/// and are reported through [`RunRecord::abort_reason`].
pub fn run_experiment(config: &RunConfig) -> Result<RunRecord> {
    config.validate()?;
    let problem = config.problem.build()?;
    if config.strategy.requires_gradients() && !problem.supports_gradients() {
        return Err(Error::GradientsRequired {
            strategy: config.strategy.name(),
        });
    }
    let n = problem.loss_count();
    let mut strategy = config.strategy.build(n)?;
    let mut params = problem.initial_point();
    let dim = params.len();
    let extra = if strategy.uncertainty_mut().is_some() { n } else { 0 };
    let mut optimizer = config.optimizer.build(dim + extra)?;

    let mut record = RunRecord {
        config: config.clone(),
        labels: problem.loss_labels(),
        rows: Vec::new(),
        steps_completed: 0,
        final_losses: vec![f64::NAN; n],
        final_objective: f64::NAN,
        final_params: Vec::new(),
        final_distance: None,
        abort_reason: None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    // parameters followed by log-variances for uncertainty weighting
    let mut state = params.clone();
    state.extend(strategy.uncertainty_mut().map_or(&[][..], |u| u.log_vars()));
    let mut grad = vec![0.0; dim + extra];

    for step in 1..=config.iterations {
        let outcome = train_step(
            problem.as_ref(),
            &mut strategy,
            &mut state,
            &mut grad,
            dim,
            step,
            &mut rng,
        );
        let row = match outcome {
            Ok(row) => row,
            Err(e) => {
                record.abort_reason = Some(format!("step {step}: {e}"));
                break;
            }
        };
        record.final_losses.clone_from(&row.losses);
        record.final_objective = row.objective;
        if let Err(e) = optimizer.step(&mut state, &grad) {
            record.abort_reason = Some(format!("step {step}: {e}"));
            break;
        }
        if let Some(u) = strategy.uncertainty_mut() {
            u.log_vars_mut().copy_from_slice(&state[dim..]);
        }
        record.steps_completed = step;
        if (step - 1) % config.record_every == 0 {
            record.rows.push(row);
        }
    }
    params.copy_from_slice(&state[..dim]);
    record.final_distance = problem.optimum().map(|o| distance(&params, o));
    record.final_params = params;
    Ok(record)
}

/// Evaluates the problem at the current parameters, weighs the losses and
/// fills `grad` with the combined gradient of the whole optimizer state.
fn train_step(
    problem: &dyn Problem,
    strategy: &mut Strategy,
    state: &mut [f64],
    grad: &mut [f64],
    dim: usize,
    step: u64,
    rng: &mut ChaCha8Rng,
) -> Result<RunRow> {
    let params = &state[..dim];
    let obs = problem.evaluate(params, step, rng)?;
    let weights = strategy.weigh(&obs)?;
    grad.iter_mut().for_each(|g| *g = 0.0);
    if let Some(gradients) = &obs.gradients {
        for (w, g) in weights.as_slice().iter().zip(gradients) {
            axpy(&mut grad[..dim], *w, g);
        }
    }
    let objective = match strategy.uncertainty_mut() {
        Some(u) => {
            let objective = u.objective(&obs.losses)?;
            grad[dim..].copy_from_slice(&objective.s_gradients);
            objective.value
        }
        None => weights.as_slice().iter().zip(&obs.losses).map(|(w, l)| w * l).sum(),
    };
    if !objective.is_finite() {
        return Err(Error::InvalidParameter {
            name: "objective",
            reason: "became non-finite",
        });
    }
    let dist_to_opt = problem.optimum().map(|o| distance(params, o));
    let raw_weights = (!weights.is_normalized()).then(|| weights.as_slice().to_vec());
    Ok(RunRow {
        step,
        losses: obs.losses,
        weights: weights.to_normalized().into_vec(),
        raw_weights,
        objective,
        dist_to_opt,
    })
}

/// Short description used in logs and summaries.
pub fn describe(config: &RunConfig) -> String {
    let mut s = String::from(config.strategy.name());
    if let StrategySpec::Cov { variant, .. } = &config.strategy {
        s.push('-');
        s.push_str(variant.name());
    }
    s.push('_');
    s.push_str(&config.seed.to_string());
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::ImageNoise;
    use crate::stats::DecaySpec;
    use crate::strategy::CovVariant;

    fn quadratic() -> ProblemSpec {
        ProblemSpec::scaled_identity_pair(vec![1.0, -1.0], 2.0, 0.0).unwrap()
    }

    fn config(strategy: StrategySpec) -> RunConfig {
        RunConfig {
            optimizer: OptimizerSpec::Sgd { lr: 1e-2, momentum: 0.0 },
            iterations: 50,
            record_every: 10,
            ..RunConfig::new(quadratic(), strategy)
        }
    }

    #[test]
    fn row_count_and_step_numbers() {
        let r = run_experiment(&config(StrategySpec::Equal)).unwrap();
        assert!(r.is_valid());
        let steps: Vec<u64> = r.rows.iter().map(|r| r.step).collect();
        assert_eq!(steps, vec![1, 11, 21, 31, 41]);
        assert_eq!(r.steps_completed, 50);
        assert_eq!(r.metric_names(), vec!["loss_q0", "loss_q1", "dist_to_opt"]);
    }

    #[test]
    fn identical_seeds_reproduce() {
        let mut c = config(StrategySpec::cov());
        c.problem = ProblemSpec::RandomQuadratic {
            dim: 3,
            losses: 2,
            rows: 4,
            noise: 0.2,
            shared_optimum: true,
            loss_scales: vec![],
            seed: 1,
        };
        assert_eq!(run_experiment(&c).unwrap(), run_experiment(&c).unwrap());
        let mut other = c.clone();
        other.seed = 1;
        assert_ne!(run_experiment(&c).unwrap().rows, run_experiment(&other).unwrap().rows);
    }

    #[test]
    fn gradient_strategies_need_gradients() {
        let mut c = config(StrategySpec::Mgda);
        c.problem = ProblemSpec::Synthetic {
            levels: vec![1.0, 2.0],
            decay_rates: vec![0.0; 2],
            noise: vec![0.1; 2],
        };
        assert_eq!(
            run_experiment(&c).unwrap_err(),
            Error::GradientsRequired { strategy: "mgda" }
        );
        c.strategy = StrategySpec::cov();
        assert!(run_experiment(&c).unwrap().is_valid());
    }

    #[test]
    fn uncertainty_learns_log_variances() {
        let mut c = config(StrategySpec::Uncertainty);
        c.problem = ProblemSpec::Synthetic {
            levels: vec![4.0, 0.25],
            decay_rates: vec![0.0; 2],
            noise: vec![0.0; 2],
        };
        c.iterations = 3000;
        c.optimizer = OptimizerSpec::Sgd { lr: 0.1, momentum: 0.0 };
        let r = run_experiment(&c).unwrap();
        let raw = r.rows.last().unwrap().raw_weights.clone().unwrap();
        // stationary point: exp(s) = L, weight 0.5 / L
        assert!((raw[0] - 0.125).abs() < 1e-6, "{raw:?}");
        assert!((raw[1] - 2.0).abs() < 1e-6, "{raw:?}");
    }

    #[test]
    fn zero_loss_aborts_uncertainty() {
        let mut c = config(StrategySpec::Uncertainty);
        c.problem = ProblemSpec::Synthetic {
            levels: vec![1.0, 0.0],
            decay_rates: vec![0.0; 2],
            noise: vec![0.0; 2],
        };
        let r = run_experiment(&c).unwrap();
        assert!(!r.is_valid());
        assert_eq!(r.steps_completed, 0);
        assert!(r.metrics().iter().all(|m| m.is_nan()));
    }

    #[test]
    fn invalid_config() {
        let mut c = config(StrategySpec::Equal);
        c.iterations = 0;
        assert!(run_experiment(&c).is_err());
        let mut c = config(StrategySpec::Equal);
        c.optimizer = OptimizerSpec::Adam { lr: -1.0 };
        assert!(run_experiment(&c).is_err());
    }

    #[test]
    fn scale_profile_of_equal_weights() {
        let mut c = config(StrategySpec::Equal);
        c.iterations = 2;
        c.problem = ProblemSpec::Multiscale {
            base: alloc::boxed::Box::new(ProblemSpec::ImageFit {
                target: crate::problem::Image::synthetic(16, 16),
                noise: ImageNoise::default(),
            }),
            scales: 4,
        };
        let r = run_experiment(&c).unwrap();
        assert_eq!(r.scale_count(), 4);
        for p in r.scale_weight_profile() {
            assert!((p - 0.25).abs() < 1e-15);
        }
        assert!((r.coarse_weight_share() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn describe_names_variant() {
        let c = config(StrategySpec::Cov {
            variant: CovVariant::LossInverse,
            decay: DecaySpec::FullHistory,
        });
        assert_eq!(describe(&c), "cov-loss-inverse_0");
    }
}
