//! Experiment configuration files.
//!
//! A config is TOML with four flat sections:
//!
//! ```toml
//! [problem]
//! kind = "multiscale"
//! base = "stereo"
//! detail_noise = 0.05
//!
//! [strategy]
//! name = "cov"
//! variant = "loss-inverse"
//!
//! [optimizer]
//! name = "adam"
//! lr = 0.01
//!
//! [run]
//! iterations = 1000
//! ```
//!
//! Every key is optional. [`resolve`] fills in defaults, checks that each
//! key applies to the chosen problem or strategy and builds the core
//! [`RunConfig`]. Errors name the offending key.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use covbalance_core::problem::{Image, ImageNoise};
use covbalance_core::strategy::DEFAULT_TEMPERATURE;
use covbalance_core::{
    CovVariant, DecaySpec, OptimizerSpec, ProblemSpec, RunConfig, StrategySpec,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::pgm::load_pgm;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub strategy: StrategySection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    /// Base problem of a multiscale composite.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scales: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub losses: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shared_optimum: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_scales: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// PGM target, relative to the config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    /// Side of the built-in synthetic target when no image is given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pixel_noise: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail_noise: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disparity: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_rates: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stream_noise: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecayValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

/// `"full"` or a fixed factor greater than one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DecayValue {
    Factor(f64),
    Name(String),
}

impl DecayValue {
    pub fn full() -> Self {
        Self::Name("full".into())
    }

    fn to_spec(&self) -> Result<DecaySpec> {
        match self {
            Self::Name(n) if n == "full" => Ok(DecaySpec::FullHistory),
            Self::Name(n) => Err(CliError::config(
                "strategy.decay",
                format!("expected \"full\" or a number greater than 1, got `{n}`"),
            )),
            Self::Factor(t) => DecaySpec::fixed(*t)
                .map_err(|_| CliError::config("strategy.decay", format!("factor must be greater than 1, got {t}"))),
        }
    }
}

impl std::fmt::Display for DecayValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Factor(t) => write!(f, "{t}"),
            Self::Name(n) => f.write_str(n),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub momentum: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_every: Option<u64>,
}

pub const DEFAULT_EXPERIMENT: &str = "default";
pub const DEFAULT_IMAGE_SIZE: usize = 16;

/// A config with every default filled in, plus the core configuration it
/// describes.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub file: ConfigFile,
    pub run: RunConfig,
    pub experiment: String,
}

impl Resolved {
    /// First 16 hex digits of the SHA-256 of the filled-in config.
    pub fn config_hash(&self) -> String {
        let text = toml::to_string(&self.file).expect("config sections serialize to TOML");
        Sha256::digest(text.as_bytes())
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// A parsed config file and the directory relative paths resolve against.
#[derive(Debug, Clone, Default)]
pub struct LoadedConfig {
    pub file: ConfigFile,
    pub base_dir: PathBuf,
    /// File stem, the default experiment name.
    pub stem: Option<String>,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let file = parse(&text).map_err(|message| CliError::Parse {
            path: path.to_path_buf(),
            message,
        })?;
        Ok(Self {
            file,
            base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            stem: path.file_stem().map(|s| s.to_string_lossy().into_owned()),
        })
    }

    pub fn resolve(&self) -> Result<Resolved> {
        resolve(&self.file, &self.base_dir, self.stem.as_deref())
    }
}

pub fn parse(text: &str) -> std::result::Result<ConfigFile, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

pub fn resolve(file: &ConfigFile, base_dir: &Path, stem: Option<&str>) -> Result<Resolved> {
    let (problem, problem_spec) = resolve_problem(&file.problem, base_dir)?;
    let (strategy, strategy_spec) = resolve_strategy(&file.strategy)?;
    let (optimizer, optimizer_spec) = resolve_optimizer(&file.optimizer)?;
    let run = fill_run(&file.run, stem)?;
    let config = RunConfig {
        problem: problem_spec,
        strategy: strategy_spec,
        optimizer: optimizer_spec,
        iterations: run.iterations.unwrap_or_default(),
        seed: run.seed.unwrap_or_default(),
        record_every: run.record_every.unwrap_or_default(),
    };
    check_buildable(&config)?;
    let experiment = run.experiment.clone().unwrap_or_default();
    Ok(Resolved {
        file: ConfigFile {
            problem,
            strategy,
            optimizer,
            run,
        },
        run: config,
        experiment,
    })
}

/// Builds every component once so that bad combinations surface as
/// configuration errors instead of failed runs.
fn check_buildable(config: &RunConfig) -> Result<()> {
    let problem = config.problem.build().map_err(|e| problem_error(&config.problem, e))?;
    if config.strategy.requires_gradients() && !problem.supports_gradients() {
        return Err(CliError::config(
            "strategy.name",
            format!(
                "strategy `{}` needs gradients, which problem `{}` does not provide",
                config.strategy.name(),
                problem.name()
            ),
        ));
    }
    config
        .strategy
        .build(problem.loss_count())
        .map_err(|e| CliError::config("strategy", e.to_string()))?;
    config
        .optimizer
        .build(problem.parameter_dim())
        .map_err(|e| CliError::config("optimizer", e.to_string()))?;
    Ok(())
}

fn problem_error(spec: &ProblemSpec, e: covbalance_core::Error) -> CliError {
    let key = match (&e, spec) {
        (covbalance_core::Error::UnsupportedBase { .. }, _) => "problem.base",
        _ => "problem",
    };
    CliError::config(key, e.to_string())
}

const QUADRATIC_KEYS: &[&str] = &["dim", "losses", "rows", "noise", "shared_optimum", "loss_scales", "seed"];
const MIXED_NORM_KEYS: &[&str] = &["samples", "dim", "noise", "seed"];
const IMAGE_FIT_KEYS: &[&str] = &["image", "size", "pixel_noise", "detail_noise"];
const STEREO_KEYS: &[&str] = &["image", "size", "pixel_noise", "detail_noise", "disparity"];
const SYNTHETIC_KEYS: &[&str] = &["levels", "decay_rates", "stream_noise"];

fn base_keys(kind: &str) -> &'static [&'static str] {
    match kind {
        "quadratic" => QUADRATIC_KEYS,
        "mixed-norm" => MIXED_NORM_KEYS,
        "image-fit" => IMAGE_FIT_KEYS,
        "stereo" => STEREO_KEYS,
        _ => SYNTHETIC_KEYS,
    }
}

/// Keys set in a section, in declaration order.
fn present_keys<T: Serialize>(section: &T) -> Vec<String> {
    match toml::Value::try_from(section) {
        Ok(toml::Value::Table(t)) => t.keys().cloned().collect(),
        _ => Vec::new(),
    }
}

fn reject_foreign_keys(section: &str, present: &[String], allowed: &[&str], owner: &str) -> Result<()> {
    let allowed: BTreeSet<&str> = allowed.iter().copied().collect();
    match present.iter().find(|k| !allowed.contains(k.as_str())) {
        Some(key) => Err(CliError::config(
            format!("{section}.{key}"),
            format!("does not apply to {owner}"),
        )),
        None => Ok(()),
    }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::config(key, format!("must be finite and positive, got {v}")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(CliError::config(key, format!("must be finite and non-negative, got {v}")))
    }
}

fn at_least_one<T: PartialOrd + From<u8> + std::fmt::Display>(key: &str, v: T) -> Result<T> {
    if v >= T::from(1) {
        Ok(v)
    } else {
        Err(CliError::config(key, format!("must be at least 1, got {v}")))
    }
}

fn resolve_problem(p: &ProblemSection, base_dir: &Path) -> Result<(ProblemSection, ProblemSpec)> {
    let kind = p.kind.clone().unwrap_or_else(|| "quadratic".into());
    if !ProblemSpec::NAMES.contains(&kind.as_str()) {
        return Err(CliError::unknown("problem.kind", "problem", &kind, &ProblemSpec::NAMES));
    }
    let present: Vec<String> = present_keys(p).into_iter().filter(|k| k != "kind").collect();
    if kind == "multiscale" {
        let base = p.base.clone().unwrap_or_else(|| "stereo".into());
        let bases: Vec<&str> = ProblemSpec::NAMES.iter().copied().filter(|n| *n != "multiscale").collect();
        if !bases.contains(&base.as_str()) {
            return Err(CliError::unknown("problem.base", "base problem", &base, &bases));
        }
        let scales = at_least_one("problem.scales", p.scales.unwrap_or(4))?;
        let mut allowed = vec!["base", "scales"];
        allowed.extend(base_keys(&base));
        reject_foreign_keys("problem", &present, &allowed, "a multiscale composite with this base")?;
        let (mut filled, spec) = resolve_base(&base, p, base_dir)?;
        filled.kind = Some(kind);
        filled.base = Some(base);
        filled.scales = Some(scales);
        let spec = ProblemSpec::Multiscale {
            base: Box::new(spec),
            scales,
        };
        return Ok((filled, spec));
    }
    reject_foreign_keys("problem", &present, base_keys(&kind), &format!("problem `{kind}`"))?;
    let (mut filled, spec) = resolve_base(&kind, p, base_dir)?;
    filled.kind = Some(kind);
    Ok((filled, spec))
}

/// Fills and builds a non-composite problem. Only keys of `kind` are read.
fn resolve_base(kind: &str, p: &ProblemSection, base_dir: &Path) -> Result<(ProblemSection, ProblemSpec)> {
    let mut f = ProblemSection::default();
    let spec = match kind {
        "quadratic" => {
            let dim = at_least_one("problem.dim", p.dim.unwrap_or(4))?;
            let losses = at_least_one("problem.losses", p.losses.unwrap_or(2))?;
            let rows = at_least_one("problem.rows", p.rows.unwrap_or(dim))?;
            let noise = non_negative("problem.noise", p.noise.unwrap_or(0.0))?;
            let shared_optimum = p.shared_optimum.unwrap_or(true);
            let loss_scales = p.loss_scales.clone().unwrap_or_default();
            if !loss_scales.is_empty() && loss_scales.len() != losses {
                return Err(CliError::config(
                    "problem.loss_scales",
                    format!("needs one entry per loss ({losses}), got {}", loss_scales.len()),
                ));
            }
            for s in &loss_scales {
                positive("problem.loss_scales", *s)?;
            }
            let seed = p.seed.unwrap_or(0);
            (f.dim, f.losses, f.rows, f.noise, f.shared_optimum, f.loss_scales, f.seed) = (
                Some(dim),
                Some(losses),
                Some(rows),
                Some(noise),
                Some(shared_optimum),
                Some(loss_scales.clone()),
                Some(seed),
            );
            ProblemSpec::RandomQuadratic {
                dim,
                losses,
                rows,
                noise,
                shared_optimum,
                loss_scales,
                seed,
            }
        }
        "mixed-norm" => {
            let samples = at_least_one("problem.samples", p.samples.unwrap_or(64))?;
            let dim = at_least_one("problem.dim", p.dim.unwrap_or(4))?;
            let noise = non_negative("problem.noise", p.noise.unwrap_or(0.1))?;
            let seed = p.seed.unwrap_or(0);
            (f.samples, f.dim, f.noise, f.seed) = (Some(samples), Some(dim), Some(noise), Some(seed));
            ProblemSpec::MixedNorm {
                samples,
                dim,
                noise,
                seed,
            }
        }
        "image-fit" | "stereo" => {
            let target = match (&p.image, p.size) {
                (Some(_), Some(_)) => {
                    return Err(CliError::config("problem.size", "cannot be combined with problem.image"))
                }
                (Some(path), None) => {
                    f.image = Some(path.clone());
                    load_pgm(&base_dir.join(path)).map_err(|e| CliError::config("problem.image", e.to_string()))?
                }
                (None, size) => {
                    let size = size.unwrap_or(DEFAULT_IMAGE_SIZE);
                    if size < 2 {
                        return Err(CliError::config("problem.size", format!("must be at least 2, got {size}")));
                    }
                    f.size = Some(size);
                    Image::synthetic(size, size)
                }
            };
            let noise = ImageNoise {
                pixel: non_negative("problem.pixel_noise", p.pixel_noise.unwrap_or(0.0))?,
                detail: non_negative("problem.detail_noise", p.detail_noise.unwrap_or(0.0))?,
            };
            (f.pixel_noise, f.detail_noise) = (Some(noise.pixel), Some(noise.detail));
            if kind == "image-fit" {
                ProblemSpec::ImageFit { target, noise }
            } else {
                let disparity = p.disparity.unwrap_or(2);
                f.disparity = Some(disparity);
                ProblemSpec::Stereo {
                    left: target,
                    disparity,
                    noise,
                }
            }
        }
        _ => {
            let levels = p
                .levels
                .clone()
                .ok_or_else(|| CliError::config("problem.levels", "is required for problem `synthetic`"))?;
            if levels.is_empty() {
                return Err(CliError::config("problem.levels", "must not be empty"));
            }
            let n = levels.len();
            let list = |key: &str, v: &Option<Vec<f64>>| -> Result<Vec<f64>> {
                let v = v.clone().unwrap_or_else(|| vec![0.0; n]);
                if v.len() != n {
                    return Err(CliError::config(
                        key,
                        format!("needs one entry per level ({n}), got {}", v.len()),
                    ));
                }
                for x in &v {
                    non_negative(key, *x)?;
                }
                Ok(v)
            };
            for x in &levels {
                non_negative("problem.levels", *x)?;
            }
            let decay_rates = list("problem.decay_rates", &p.decay_rates)?;
            let noise = list("problem.stream_noise", &p.stream_noise)?;
            (f.levels, f.decay_rates, f.stream_noise) =
                (Some(levels.clone()), Some(decay_rates.clone()), Some(noise.clone()));
            ProblemSpec::Synthetic {
                levels,
                decay_rates,
                noise,
            }
        }
    };
    Ok((f, spec))
}

fn resolve_strategy(s: &StrategySection) -> Result<(StrategySection, StrategySpec)> {
    let name = s.name.clone().unwrap_or_else(|| "cov".into());
    let allowed: &[&str] = match name.as_str() {
        "cov" => &["name", "variant", "decay"],
        "gradnorm" => &["name", "temperature"],
        "static" => &["name", "weights"],
        "equal" | "uncertainty" | "mgda" => &["name"],
        _ => return Err(CliError::unknown("strategy.name", "strategy", &name, &StrategySpec::NAMES)),
    };
    reject_foreign_keys("strategy", &present_keys(s), allowed, &format!("strategy `{name}`"))?;
    let mut f = StrategySection {
        name: Some(name.clone()),
        ..Default::default()
    };
    let spec = match name.as_str() {
        "cov" => {
            let variant_name = s.variant.clone().unwrap_or_else(|| CovVariant::default().name().into());
            let variant = CovVariant::from_name(&variant_name).ok_or_else(|| {
                let names: Vec<&str> = CovVariant::ALL.iter().map(|v| v.name()).collect();
                CliError::unknown("strategy.variant", "variant", &variant_name, &names)
            })?;
            let decay_value = s.decay.clone().unwrap_or_else(DecayValue::full);
            let decay = decay_value.to_spec()?;
            f.variant = Some(variant_name);
            f.decay = Some(decay_value);
            StrategySpec::Cov { variant, decay }
        }
        "gradnorm" => {
            let temperature = positive("strategy.temperature", s.temperature.unwrap_or(DEFAULT_TEMPERATURE))?;
            f.temperature = Some(temperature);
            StrategySpec::GradNorm { temperature }
        }
        "static" => {
            let weights = s
                .weights
                .clone()
                .ok_or_else(|| CliError::config("strategy.weights", "is required for strategy `static`"))?;
            for w in &weights {
                positive("strategy.weights", *w)?;
            }
            f.weights = Some(weights.clone());
            StrategySpec::Static(weights)
        }
        "equal" => StrategySpec::Equal,
        "uncertainty" => StrategySpec::Uncertainty,
        _ => StrategySpec::Mgda,
    };
    Ok((f, spec))
}

fn resolve_optimizer(o: &OptimizerSection) -> Result<(OptimizerSection, OptimizerSpec)> {
    let name = o.name.clone().unwrap_or_else(|| "adam".into());
    if !OptimizerSpec::NAMES.contains(&name.as_str()) {
        return Err(CliError::unknown("optimizer.name", "optimizer", &name, &OptimizerSpec::NAMES));
    }
    let lr = positive("optimizer.lr", o.lr.unwrap_or(OptimizerSpec::default().lr()))?;
    let mut f = OptimizerSection {
        name: Some(name.clone()),
        lr: Some(lr),
        momentum: None,
    };
    let spec = if name == "sgd" {
        let momentum = o.momentum.unwrap_or(0.0);
        if !(0.0..1.0).contains(&momentum) {
            return Err(CliError::config("optimizer.momentum", format!("must lie in [0, 1), got {momentum}")));
        }
        f.momentum = Some(momentum);
        OptimizerSpec::Sgd { lr, momentum }
    } else {
        if o.momentum.is_some() {
            return Err(CliError::config("optimizer.momentum", "does not apply to optimizer `adam`"));
        }
        OptimizerSpec::Adam { lr }
    };
    Ok((f, spec))
}

fn fill_run(r: &RunSection, stem: Option<&str>) -> Result<RunSection> {
    let experiment = r
        .experiment
        .clone()
        .unwrap_or_else(|| stem.unwrap_or(DEFAULT_EXPERIMENT).to_string());
    let valid_name = !experiment.is_empty()
        && experiment
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && experiment != "."
        && experiment != "..";
    if !valid_name {
        return Err(CliError::config(
            "run.experiment",
            format!("`{experiment}` must be non-empty and use only letters, digits, `-`, `_` and `.`"),
        ));
    }
    Ok(RunSection {
        experiment: Some(experiment),
        iterations: Some(at_least_one("run.iterations", r.iterations.unwrap_or(1000))?),
        seed: Some(r.seed.unwrap_or(0)),
        record_every: Some(at_least_one("run.record_every", r.record_every.unwrap_or(1))?),
    })
}
