//! Adaptive loss weighting for single-task multi-loss optimization.
//!
//! The crate is `no_std` (it needs `alloc`) and carries everything that is
//! pure computation:
//!
//! - [`stats`]: Welford accumulators with full-history or fixed-factor decay.
//! - [`strategy`]: coefficient-of-variation weighting and the multi-task
//!   baselines (uncertainty weighting, GradNorm, min-norm / MGDA), plus
//!   equal and static weights.
//! - [`problem`]: differentiable toy problems with analytic gradients.
//! - [`optim`]: SGD with momentum and Adam.
//! - [`harness`]: the training loop, run records and win-rate comparison.
//!
//! File formats, configuration parsing and the command line live in the
//! `covbalance` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod harness;
pub mod linalg;
pub mod optim;
pub mod problem;
pub mod stats;
pub mod strategy;
pub mod weights;

pub use error::{Error, Result};
pub use harness::{
    compute_win_rate, run_experiment, sweep, MetricDirection, RunConfig, RunRecord, SweepAxis,
    SweepValue,
};
pub use optim::{Optimizer, OptimizerSpec};
pub use problem::{Problem, ProblemSpec};
pub use stats::{DecaySpec, WelfordAccumulator};
pub use strategy::{CovVariant, Strategy, StrategySpec};
pub use weights::{equal_weights, static_weights, LossObservation, WeightVector};
