use covbalance_core::linalg::Matrix;
use covbalance_core::problem::quadratic::QuadraticTerm;
use covbalance_core::problem::{Image, ImageNoise};
use covbalance_core::{
    run_experiment, CovVariant, DecaySpec, OptimizerSpec, ProblemSpec, RunConfig, StrategySpec,
};
use proptest::prelude::*;

fn term() -> QuadraticTerm {
    let a = Matrix::from_rows(&[vec![2.0, 0.5, 0.0], vec![0.0, 1.0, -0.3], vec![0.1, 0.0, 1.5]]).unwrap();
    QuadraticTerm::new(a, vec![1.0, -1.0, 0.5], 0.0).unwrap()
}

#[test]
fn equal_weights_on_duplicated_loss_follow_the_single_loss_run() {
    let make = |terms: Vec<QuadraticTerm>| RunConfig {
        optimizer: OptimizerSpec::Adam { lr: 1e-2 },
        iterations: 500,
        ..RunConfig::new(ProblemSpec::Quadratic { terms, optimum: None }, StrategySpec::Equal)
    };
    let single = run_experiment(&make(vec![term()])).unwrap();
    let double = run_experiment(&make(vec![term(), term()])).unwrap();
    assert_eq!(single.rows.len(), double.rows.len());
    for (a, b) in single.rows.iter().zip(&double.rows) {
        assert!((a.objective - b.objective).abs() <= 1e-12, "step {}", a.step);
    }
    for (a, b) in single.final_params.iter().zip(&double.final_params) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn cov_on_constant_losses_gives_exact_uniform_rows() {
    for variant in CovVariant::ALL {
        for n in [1usize, 2, 3, 7] {
            let config = RunConfig {
                iterations: 100,
                ..RunConfig::new(
                    ProblemSpec::Synthetic {
                        levels: (1..=n).map(|i| i as f64 * 0.7).collect(),
                        decay_rates: vec![0.0; n],
                        noise: vec![0.0; n],
                    },
                    StrategySpec::Cov {
                        variant,
                        decay: DecaySpec::FullHistory,
                    },
                )
            };
            let record = run_experiment(&config).unwrap();
            let uniform = 1.0 / n as f64;
            for row in &record.rows {
                assert!(row.weights.iter().all(|w| *w == uniform), "{} n={n}: {:?}", variant.name(), row.weights);
            }
        }
    }
}

/// RatioCov on the 32-loss composite: after a 10% burn-in, no attenuated
/// coarse-scale weight exceeds the largest full-resolution weight.
#[test]
fn ratio_cov_keeps_coarse_smoothness_below_full_scale() {
    let config = RunConfig {
        optimizer: OptimizerSpec::Adam { lr: 1e-2 },
        iterations: 1000,
        ..RunConfig::new(
            ProblemSpec::Multiscale {
                base: Box::new(ProblemSpec::Stereo {
                    left: Image::synthetic(16, 16),
                    disparity: 2,
                    noise: ImageNoise {
                        pixel: 0.0,
                        detail: 0.05,
                    },
                }),
                scales: 4,
            },
            StrategySpec::cov(),
        )
    };
    for seed in 0..3 {
        let record = run_experiment(&RunConfig { seed, ..config.clone() }).unwrap();
        assert!(record.is_valid());
        let burn_in = record.rows.len() / 10;
        for row in &record.rows[burn_in..] {
            let full_max = row
                .weights
                .iter()
                .zip(&record.labels)
                .filter(|(_, l)| l.scale == 0)
                .map(|(w, _)| *w)
                .fold(0.0, f64::max);
            for (w, label) in row.weights.iter().zip(&record.labels) {
                if label.scale > 0 && label.name.starts_with("disp") {
                    assert!(*w < full_max, "seed {seed} step {}: {} = {w} >= {full_max}", row.step, label.name);
                }
            }
        }
    }
}

fn small_problem() -> ProblemSpec {
    ProblemSpec::RandomQuadratic {
        dim: 3,
        losses: 3,
        rows: 4,
        noise: 0.3,
        shared_optimum: false,
        loss_scales: vec![],
        seed: 5,
    }
}

fn strategies() -> Vec<StrategySpec> {
    let mut v = vec![StrategySpec::Equal, StrategySpec::Static(vec![1.0, 2.0, 5.0]), StrategySpec::gradnorm(), StrategySpec::Mgda];
    v.extend(CovVariant::ALL.into_iter().map(|variant| StrategySpec::Cov {
        variant,
        decay: DecaySpec::FixedFactor(10.0),
    }));
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn row_count_is_ceiling_of_iterations_over_interval(iterations in 1u64..300, every in 1u64..50) {
        let config = RunConfig {
            iterations,
            record_every: every,
            ..RunConfig::new(small_problem(), StrategySpec::cov())
        };
        let record = run_experiment(&config).unwrap();
        prop_assert_eq!(record.rows.len() as u64, iterations.div_ceil(every));
    }

    #[test]
    fn normalized_rows_sum_to_one(k in 0usize..8, seed in 0u64..1000) {
        let config = RunConfig {
            iterations: 200,
            seed,
            optimizer: OptimizerSpec::Sgd { lr: 1e-2, momentum: 0.5 },
            ..RunConfig::new(small_problem(), strategies()[k].clone())
        };
        let record = run_experiment(&config).unwrap();
        prop_assert!(record.is_valid());
        for row in &record.rows {
            let sum: f64 = row.weights.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
            prop_assert!(row.weights.iter().all(|w| *w >= 0.0));
        }
    }

    #[test]
    fn equal_seeds_give_equal_records(k in 0usize..8, seed in 0u64..1000) {
        let config = RunConfig {
            iterations: 50,
            seed,
            ..RunConfig::new(small_problem(), strategies()[k].clone())
        };
        prop_assert_eq!(run_experiment(&config).unwrap(), run_experiment(&config).unwrap());
    }
}
