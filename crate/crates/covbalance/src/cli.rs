//! Command-line interface.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use covbalance_core::{compute_win_rate, CovVariant, OptimizerSpec, ProblemSpec, StrategySpec, SweepAxis};

use crate::config::{DecayValue, LoadedConfig, Resolved, StrategySection};
use crate::error::{CliError, Result};
use crate::plot::write_plot_path;
use crate::record::{format_float, RunTable};
use crate::runner::{execute, write_summary, Finished, Job};

fn names_help() -> String {
    let variants: Vec<&str> = CovVariant::ALL.iter().map(|v| v.name()).collect();
    format!(
        "Strategies: {}\nVariants: {}\nProblems: {}\nAxes: {}\nOptimizers: {}\n\n\
         Exit status: 0 on success, 1 if a run aborted, 2 for invalid configuration or arguments.",
        StrategySpec::NAMES.join(", "),
        variants.join(", "),
        ProblemSpec::NAMES.join(", "),
        SweepAxis::NAMES.join(", "),
        OptimizerSpec::NAMES.join(", "),
    )
}

#[derive(Debug, Parser)]
#[command(name = "covbalance", version, about = "Loss-weighting experiments on toy problems", after_help = names_help())]
struct Cli {
    /// Root output directory.
    #[arg(long, global = true, env = "COVBALANCE_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,

    /// Worker threads for independent runs.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one configuration and write its CSV.
    Run(RunArgs),
    /// Repeat a configuration over values of one hyperparameter.
    Sweep(SweepArgs),
    /// Run several strategies over a seed battery and print pairwise win rates.
    Compare(CompareArgs),
    /// Convert run CSVs to long-format plot data.
    ExportPlotData(ExportArgs),
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// TOML config file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,

    /// Hyperparameter to vary.
    #[arg(long)]
    axis: String,

    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,

    /// Seeds per value, starting at the configured seed.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    config: ConfigArgs,

    /// Comma-separated strategies; `cov:<variant>` picks a variant.
    #[arg(long, value_delimiter = ',', default_value = "cov,equal,gradnorm,mgda,uncertainty")]
    strategies: Vec<String>,

    /// Number of seeds, starting at the configured seed.
    #[arg(long, default_value_t = 32)]
    seeds: u64,
}

#[derive(Debug, Args)]
struct ExportArgs {
    /// Run CSV files or directories to search.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Run(a) => run(cli, a),
        Command::Sweep(a) => sweep(cli, a),
        Command::Compare(a) => compare(cli, a),
        Command::ExportPlotData(a) => export(cli, a),
    }
}

fn load(args: &ConfigArgs) -> Result<LoadedConfig> {
    let mut loaded = match &args.config {
        Some(path) => LoadedConfig::load(path)?,
        None => LoadedConfig::default(),
    };
    if let Some(seed) = args.seed {
        loaded.file.run.seed = Some(seed);
    }
    Ok(loaded)
}

fn strategy_label(s: &StrategySection) -> String {
    s.name.clone().unwrap_or_default()
}

fn print_runs(runs: &[Finished]) {
    let mut out = std::io::stdout().lock();
    for r in runs {
        let rec = &r.record;
        let tag = r
            .job
            .sweep
            .as_ref()
            .map(|(a, v)| format!(" {a}={v}"))
            .unwrap_or_default();
        let status = match &rec.abort_reason {
            None => "ok".to_string(),
            Some(reason) => format!("aborted ({reason})"),
        };
        let dist = rec.final_distance.map(format_float).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{}{} seed={} {} objective={} dist_to_opt={} -> {}",
            r.job.label,
            tag,
            rec.config.seed,
            status,
            format_float(rec.final_objective),
            dist,
            r.job.csv_path().display()
        );
    }
}

/// Writes the summary and reports 1 if any run aborted.
fn finish(exp_dir: &Path, runs: &[Finished]) -> Result<i32> {
    let summary = exp_dir.join("summary.csv");
    write_summary(&summary, runs)?;
    println!("summary: {}", summary.display());
    Ok(if runs.iter().all(|r| r.record.is_valid()) { 0 } else { 1 })
}

fn seeds(base: u64, count: u64) -> Result<Vec<u64>> {
    if count == 0 {
        return Err(CliError::config("--seeds", "must be at least 1"));
    }
    base.checked_add(count - 1)
        .ok_or_else(|| CliError::config("--seeds", "seed range overflows"))?;
    Ok((base..base + count).collect())
}

fn run(cli: &Cli, args: &RunArgs) -> Result<i32> {
    let resolved = load(&args.config)?.resolve()?;
    let exp_dir = cli.out_dir.join(&resolved.experiment);
    let job = Job {
        label: strategy_label(&resolved.file.strategy),
        dir: exp_dir.clone(),
        resolved,
        sweep: None,
    };
    let runs = execute(vec![job], cli.jobs)?;
    print_runs(&runs);
    finish(&exp_dir, &runs)
}

fn sweep(cli: &Cli, args: &SweepArgs) -> Result<i32> {
    let loaded = load(&args.config)?;
    let base = loaded.resolve()?;
    let axis = SweepAxis::from_name(&args.axis)
        .map_err(|_| CliError::unknown("--axis", "axis", &args.axis, &SweepAxis::NAMES))?;
    let exp_dir = cli.out_dir.join(&base.experiment);
    let mut jobs = Vec::new();
    let mut labels = Vec::new();
    for raw in &args.values {
        let value = axis
            .parse_value(raw)
            .map_err(|e| CliError::config("--values", e.to_string()))?;
        value
            .apply(&base.run)
            .map_err(|e| CliError::config("--axis", e.to_string()))?;
        let label = value.label();
        if labels.contains(&label) {
            return Err(CliError::config("--values", format!("`{label}` is listed twice")));
        }
        labels.push(label.clone());
        let mut file = loaded.file.clone();
        match axis {
            SweepAxis::Decay => {
                file.strategy.decay = Some(match raw.trim() {
                    "full" => DecayValue::full(),
                    t => DecayValue::Factor(t.parse().expect("validated by parse_value")),
                })
            }
            SweepAxis::Lr => file.optimizer.lr = Some(raw.trim().parse().expect("validated by parse_value")),
            SweepAxis::Temperature => {
                file.strategy.temperature = Some(raw.trim().parse().expect("validated by parse_value"))
            }
            SweepAxis::Variant => file.strategy.variant = Some(raw.trim().to_string()),
        }
        for seed in seeds(base.run.seed, args.seeds)? {
            file.run.seed = Some(seed);
            let resolved = LoadedConfig {
                file: file.clone(),
                ..loaded.clone()
            }
            .resolve()?;
            jobs.push(Job {
                label: strategy_label(&resolved.file.strategy),
                dir: exp_dir.join(format!("{}-{label}", axis.name())),
                resolved,
                sweep: Some((axis.name().to_string(), label.clone())),
            });
        }
    }
    let runs = execute(jobs, cli.jobs)?;
    print_runs(&runs);
    finish(&exp_dir, &runs)
}

/// Strategy section and file label for one `--strategies` entry.
fn compare_entry(entry: &str, configured: &StrategySection) -> Result<(String, StrategySection)> {
    let entry = entry.trim();
    let (name, variant) = match entry.split_once(':') {
        Some((n, v)) => (n, Some(v)),
        None => (entry, None),
    };
    if !StrategySpec::NAMES.contains(&name) {
        return Err(CliError::unknown("--strategies", "strategy", name, &StrategySpec::NAMES));
    }
    if variant.is_some() && name != "cov" {
        return Err(CliError::config("--strategies", format!("`{entry}`: only cov takes a variant")));
    }
    let same = configured.name.as_deref() == Some(name);
    let mut section = if same {
        configured.clone()
    } else {
        StrategySection {
            name: Some(name.to_string()),
            ..Default::default()
        }
    };
    if name == "static" && section.weights.is_none() {
        return Err(CliError::config(
            "--strategies",
            "static needs `strategy.weights`, so the config must select strategy `static`",
        ));
    }
    let label = match variant {
        Some(v) => {
            section.variant = Some(v.to_string());
            format!("cov-{v}")
        }
        None => name.to_string(),
    };
    Ok((label, section))
}

fn compare(cli: &Cli, args: &CompareArgs) -> Result<i32> {
    let loaded = load(&args.config)?;
    let base = loaded.resolve()?;
    let exp_dir = cli.out_dir.join(&base.experiment);
    let seed_list = seeds(base.run.seed, args.seeds)?;
    let mut labels: Vec<String> = Vec::new();
    let mut jobs = Vec::new();
    for entry in &args.strategies {
        let (label, section) = compare_entry(entry, &base.file.strategy)?;
        if labels.contains(&label) {
            return Err(CliError::config("--strategies", format!("`{label}` is listed twice")));
        }
        labels.push(label.clone());
        for &seed in &seed_list {
            let mut file = loaded.file.clone();
            file.strategy = section.clone();
            file.run.seed = Some(seed);
            let resolved: Resolved = LoadedConfig {
                file,
                ..loaded.clone()
            }
            .resolve()?;
            jobs.push(Job {
                label: label.clone(),
                dir: exp_dir.clone(),
                resolved,
                sweep: None,
            });
        }
    }
    let runs = execute(jobs, cli.jobs)?;
    print_runs(&runs);

    let per = seed_list.len();
    let metrics: Vec<Vec<Vec<f64>>> = runs.chunks(per).map(|c| c.iter().map(|r| r.record.metrics()).collect()).collect();
    let directions = runs[0].record.metric_directions();
    let mut matrix = vec![vec![0.0; labels.len()]; labels.len()];
    for (i, row) in matrix.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = compute_win_rate(&metrics[i], &metrics[j], &directions)?;
        }
    }
    print_matrix(&labels, &matrix);
    write_matrix(&exp_dir.join("win_rates.csv"), &labels, &matrix)?;
    finish(&exp_dir, &runs)
}

fn print_matrix(labels: &[String], matrix: &[Vec<f64>]) {
    let width = labels.iter().map(String::len).max().unwrap_or(0).max(6);
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "win rate of row against column:");
    let _ = write!(out, "{:width$}", "");
    for l in labels {
        let _ = write!(out, " {l:>width$}");
    }
    let _ = writeln!(out);
    for (l, row) in labels.iter().zip(matrix) {
        let _ = write!(out, "{l:width$}");
        for v in row {
            let _ = write!(out, " {v:>width$.4}");
        }
        let _ = writeln!(out);
    }
}

fn write_matrix(path: &Path, labels: &[String], matrix: &[Vec<f64>]) -> Result<()> {
    let fail = |e: csv::Error| CliError::format("win-rate matrix", e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    let mut header = vec!["strategy".to_string()];
    header.extend(labels.iter().cloned());
    w.write_record(&header).map_err(fail)?;
    for (l, row) in labels.iter().zip(matrix) {
        let mut rec = vec![l.clone()];
        rec.extend(row.iter().copied().map(format_float));
        w.write_record(&rec).map_err(fail)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Run CSVs below `dir`, in path order.
fn collect_csvs(dir: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| CliError::io(dir, e)))
        .collect::<Result<_>>()?;
    entries.sort();
    for path in entries {
        if path.is_dir() {
            collect_csvs(&path, found)?;
        } else if path.extension().is_some_and(|e| e == "csv") && is_run_csv(&path) {
            found.push(path);
        }
    }
    Ok(())
}

fn is_run_csv(path: &Path) -> bool {
    let Ok(file) = std::fs::File::open(path) else {
        return false;
    };
    let mut first = String::new();
    let _ = std::io::BufRead::read_line(&mut std::io::BufReader::new(file), &mut first);
    first.starts_with("step,loss_")
}

fn export(cli: &Cli, args: &ExportArgs) -> Result<i32> {
    let dest = cli.out_dir.join("plot-data");
    let mut pairs: Vec<(PathBuf, PathBuf)> = Vec::new();
    for input in &args.inputs {
        if input.is_dir() {
            let mut found = Vec::new();
            collect_csvs(input, &mut found)?;
            for f in found {
                let rel = f.strip_prefix(input).expect("found below input").with_extension("plot.csv");
                pairs.push((f, dest.join(rel)));
            }
        } else {
            let name = input
                .file_stem()
                .ok_or_else(|| CliError::config("inputs", format!("`{}` is not a file", input.display())))?;
            pairs.push((input.clone(), dest.join(name).with_extension("plot.csv")));
        }
    }
    if pairs.is_empty() {
        return Err(CliError::config("inputs", "no run CSV files found"));
    }
    for (src, out) in &pairs {
        let table = RunTable::read_path(src)?;
        write_plot_path(&table, out)?;
        println!("{} -> {}", src.display(), out.display());
    }
    Ok(0)
}
