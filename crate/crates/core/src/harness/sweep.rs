use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use super::{run_experiment, RunConfig, RunRecord};
use crate::error::{Error, Result};
use crate::stats::DecaySpec;
use crate::strategy::{CovVariant, StrategySpec};

/// Hyperparameter that a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Accumulator decay of the CoV strategy: `full` or a fixed factor > 1.
    Decay,
    /// Optimizer learning rate.
    Lr,
    /// GradNorm temperature.
    Temperature,
    /// CoV statistic.
    Variant,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 4] = [Self::Decay, Self::Lr, Self::Temperature, Self::Variant];
    pub const NAMES: [&'static str; 4] = ["decay", "lr", "temperature", "variant"];

    pub fn name(self) -> &'static str {
        match self {
            Self::Decay => "decay",
            Self::Lr => "lr",
            Self::Temperature => "temperature",
            Self::Variant => "variant",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == name)
            .ok_or_else(|| Error::UnknownAxis(name.to_string()))
    }

    pub fn parse_value(self, raw: &str) -> Result<SweepValue> {
        let raw = raw.trim();
        let invalid = || Error::InvalidAxisValue {
            axis: self.name(),
            value: raw.to_string(),
        };
        let positive = || -> Result<f64> {
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v > 0.0)
                .ok_or_else(invalid)
        };
        Ok(match self {
            Self::Decay if raw == "full" => SweepValue::Decay(DecaySpec::FullHistory),
            Self::Decay => SweepValue::Decay(DecaySpec::fixed(positive()?).map_err(|_| invalid())?),
            Self::Lr => SweepValue::Lr(positive()?),
            Self::Temperature => SweepValue::Temperature(positive()?),
            Self::Variant => SweepValue::Variant(CovVariant::from_name(raw).ok_or_else(invalid)?),
        })
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One point on a sweep axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepValue {
    Decay(DecaySpec),
    Lr(f64),
    Temperature(f64),
    Variant(CovVariant),
}

impl SweepValue {
    pub fn axis(&self) -> SweepAxis {
        match self {
            Self::Decay(_) => SweepAxis::Decay,
            Self::Lr(_) => SweepAxis::Lr,
            Self::Temperature(_) => SweepAxis::Temperature,
            Self::Variant(_) => SweepAxis::Variant,
        }
    }

    /// `base` with this value substituted.
    pub fn apply(&self, base: &RunConfig) -> Result<RunConfig> {
        let mut config = base.clone();
        match (*self, &mut config.strategy) {
            (Self::Lr(lr), _) => config.optimizer = config.optimizer.with_lr(lr),
            (Self::Decay(d), StrategySpec::Cov { decay, .. }) => *decay = d,
            (Self::Variant(v), StrategySpec::Cov { variant, .. }) => *variant = v,
            (Self::Temperature(t), StrategySpec::GradNorm { temperature }) => *temperature = t,
            (Self::Decay(_) | Self::Variant(_), _) => {
                return Err(Error::InvalidParameter {
                    name: "sweep axis",
                    reason: "decay and variant sweeps need the cov strategy",
                })
            }
            (Self::Temperature(_), _) => {
                return Err(Error::InvalidParameter {
                    name: "sweep axis",
                    reason: "temperature sweeps need the gradnorm strategy",
                })
            }
        }
        Ok(config)
    }

    /// Short text form, as accepted by [`SweepAxis::parse_value`].
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Decay(DecaySpec::FullHistory) => f.write_str("full"),
            Self::Decay(DecaySpec::FixedFactor(t)) => write!(f, "{t}"),
            Self::Lr(v) | Self::Temperature(v) => write!(f, "{v}"),
            Self::Variant(v) => f.write_str(v.name()),
        }
    }
}

/// Runs `base` once per value, in order.
pub fn sweep(base: &RunConfig, values: &[SweepValue]) -> Result<Vec<(SweepValue, RunRecord)>> {
    if values.is_empty() {
        return Err(Error::Empty { what: "sweep values" });
    }
    let configs = values
        .iter()
        .map(|v| v.apply(base))
        .collect::<Result<Vec<_>>>()?;
    values
        .iter()
        .zip(&configs)
        .map(|(v, c)| Ok((*v, run_experiment(c)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::OptimizerSpec;
    use crate::problem::ProblemSpec;
    use alloc::vec;

    fn base() -> RunConfig {
        RunConfig {
            iterations: 20,
            ..RunConfig::new(
                ProblemSpec::scaled_identity_pair(vec![1.0], 3.0, 0.1).unwrap(),
                StrategySpec::cov(),
            )
        }
    }

    #[test]
    fn axis_names_round_trip() {
        for axis in SweepAxis::ALL {
            assert_eq!(SweepAxis::from_name(axis.name()).unwrap(), axis);
        }
        assert_eq!(
            SweepAxis::from_name("momentum").unwrap_err(),
            Error::UnknownAxis("momentum".into())
        );
    }

    #[test]
    fn value_parsing() {
        assert_eq!(SweepAxis::Decay.parse_value("full").unwrap(), SweepValue::Decay(DecaySpec::FullHistory));
        assert_eq!(SweepAxis::Decay.parse_value("10").unwrap(), SweepValue::Decay(DecaySpec::FixedFactor(10.0)));
        assert!(SweepAxis::Decay.parse_value("1").is_err());
        assert!(SweepAxis::Lr.parse_value("-1e-3").is_err());
        assert!(SweepAxis::Lr.parse_value("abc").is_err());
        assert_eq!(
            SweepAxis::Variant.parse_value("loss-cov").unwrap(),
            SweepValue::Variant(CovVariant::LossCov)
        );
        assert_eq!(
            SweepAxis::Variant.parse_value("bogus").unwrap_err(),
            Error::InvalidAxisValue {
                axis: "variant",
                value: "bogus".into()
            }
        );
    }

    #[test]
    fn labels_parse_back() {
        let values = [
            SweepValue::Decay(DecaySpec::FullHistory),
            SweepValue::Decay(DecaySpec::FixedFactor(50.0)),
            SweepValue::Lr(1e-3),
            SweepValue::Temperature(1.5),
            SweepValue::Variant(CovVariant::RatioInverse),
        ];
        for v in values {
            assert_eq!(v.axis().parse_value(&v.label()).unwrap(), v);
        }
    }

    #[test]
    fn apply_checks_strategy() {
        let c = base();
        assert!(SweepValue::Temperature(2.0).apply(&c).is_err());
        let lr = SweepValue::Lr(0.5).apply(&c).unwrap();
        assert_eq!(lr.optimizer, OptimizerSpec::default().with_lr(0.5));
        let mut gn = c.clone();
        gn.strategy = StrategySpec::gradnorm();
        assert!(SweepValue::Variant(CovVariant::LossCov).apply(&gn).is_err());
        assert_eq!(
            SweepValue::Temperature(2.0).apply(&gn).unwrap().strategy,
            StrategySpec::GradNorm { temperature: 2.0 }
        );
    }

    #[test]
    fn sweep_runs_every_value() {
        let values: Vec<_> = CovVariant::ALL.into_iter().map(SweepValue::Variant).collect();
        let out = sweep(&base(), &values).unwrap();
        assert_eq!(out.len(), 4);
        for ((v, rec), variant) in out.iter().zip(CovVariant::ALL) {
            assert_eq!(*v, SweepValue::Variant(variant));
            assert!(rec.is_valid());
        }
        assert!(sweep(&base(), &[]).is_err());
    }
}
