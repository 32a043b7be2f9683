//! Runs batches of resolved configs and writes their CSVs and summary.

use std::path::{Path, PathBuf};

use covbalance_core::{run_experiment, RunRecord};
use rayon::prelude::*;

use crate::config::Resolved;
use crate::error::{CliError, Result};
use crate::record::{format_float, RunTable};

/// One run to execute.
#[derive(Debug, Clone)]
pub struct Job {
    /// File name prefix, e.g. `cov` or `cov-loss-inverse`.
    pub label: String,
    /// Directory the run CSV goes to.
    pub dir: PathBuf,
    pub resolved: Resolved,
    /// Axis and value for sweep runs.
    pub sweep: Option<(String, String)>,
}

impl Job {
    pub fn csv_path(&self) -> PathBuf {
        self.dir.join(format!("{}_{}.csv", self.label, self.resolved.run.seed))
    }
}

#[derive(Debug, Clone)]
pub struct Finished {
    pub job: Job,
    pub record: RunRecord,
}

/// Runs every job on a pool of `threads` workers (rayon's default when
/// `None`) and writes each run's CSV. Results keep the job order.
pub fn execute(jobs: Vec<Job>, threads: Option<usize>) -> Result<Vec<Finished>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::config("--jobs", "must be at least 1"));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::format("thread pool", e.to_string()))?;
    let records: Vec<Result<RunRecord>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| run_experiment(&job.resolved.run).map_err(|e| CliError::config("run", e.to_string())))
            .collect()
    });
    let mut finished = Vec::with_capacity(jobs.len());
    for (job, record) in jobs.into_iter().zip(records) {
        let record = record?;
        RunTable::from_record(&record).write_path(&job.csv_path())?;
        finished.push(Finished { job, record });
    }
    Ok(finished)
}

const SUMMARY_COLUMNS: [&str; 22] = [
    "experiment",
    "label",
    "seed",
    "sweep_axis",
    "sweep_value",
    "problem",
    "strategy",
    "variant",
    "decay",
    "temperature",
    "optimizer",
    "lr",
    "momentum",
    "iterations",
    "record_every",
    "config_hash",
    "status",
    "steps_completed",
    "final_objective",
    "final_dist_to_opt",
    "abort_reason",
    "csv",
];

/// Writes one row per run. Hyperparameters are the resolved values, so
/// defaults appear explicitly; settings that do not apply to a run's
/// strategy or optimizer are left empty. Final losses follow as
/// `final_loss_<name>` columns.
pub fn write_summary(path: &Path, runs: &[Finished]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let fail = |e: csv::Error| CliError::format("summary", e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    let loss_names: Vec<String> = runs
        .first()
        .map(|r| r.record.labels.iter().map(|l| l.name.clone()).collect())
        .unwrap_or_default();
    let mut header: Vec<String> = SUMMARY_COLUMNS.iter().map(|c| c.to_string()).collect();
    header.extend(loss_names.iter().map(|n| format!("final_loss_{n}")));
    w.write_record(&header).map_err(fail)?;
    for run in runs {
        let f = &run.job.resolved.file;
        let rec = &run.record;
        let opt = |v: Option<String>| v.unwrap_or_default();
        let (axis, value) = run.job.sweep.clone().unwrap_or_default();
        let mut row = vec![
            run.job.resolved.experiment.clone(),
            run.job.label.clone(),
            rec.config.seed.to_string(),
            axis,
            value,
            opt(f.problem.kind.clone()),
            opt(f.strategy.name.clone()),
            opt(f.strategy.variant.clone()),
            opt(f.strategy.decay.as_ref().map(|d| d.to_string())),
            opt(f.strategy.temperature.map(format_float)),
            opt(f.optimizer.name.clone()),
            opt(f.optimizer.lr.map(format_float)),
            opt(f.optimizer.momentum.map(format_float)),
            rec.config.iterations.to_string(),
            rec.config.record_every.to_string(),
            run.job.resolved.config_hash(),
            if rec.is_valid() { "ok" } else { "aborted" }.to_string(),
            rec.steps_completed.to_string(),
            format_float(rec.final_objective),
            opt(rec.final_distance.map(format_float)),
            opt(rec.abort_reason.clone()),
            run.job.csv_path().display().to_string(),
        ];
        row.extend(rec.final_losses.iter().copied().map(format_float));
        if row.len() != header.len() {
            return Err(CliError::format("summary", "runs in one summary must share a problem"));
        }
        w.write_record(&row).map_err(fail)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
