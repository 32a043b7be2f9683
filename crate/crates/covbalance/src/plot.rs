//! Long-format plot data: one `step,series,value` line per recorded value.
//!
//! Series are named after the run CSV columns. `dist_to_opt` lines are left
//! out when the optimum is unknown. Reading a plot file rebuilds the run
//! table exactly.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use covbalance_core::harness::RunRow;

use crate::error::{CliError, Result};
use crate::record::{format_float, parse_float, RunTable};

pub fn write_plot_data<W: Write>(table: &RunTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let fail = |e: csv::Error| CliError::format("plot data", e.to_string());
    w.write_record(["step", "series", "value"]).map_err(fail)?;
    for row in &table.rows {
        let step = row.step.to_string();
        let mut put = |series: String, v: f64| w.write_record([step.as_str(), &series, &format_float(v)]);
        for (name, v) in table.loss_names.iter().zip(&row.losses) {
            put(format!("loss_{name}"), *v).map_err(fail)?;
        }
        for (name, v) in table.loss_names.iter().zip(&row.weights) {
            put(format!("weight_{name}"), *v).map_err(fail)?;
        }
        put("objective".into(), row.objective).map_err(fail)?;
        if let Some(d) = row.dist_to_opt {
            put("dist_to_opt".into(), d).map_err(fail)?;
        }
        for (name, v) in table.loss_names.iter().zip(row.raw_weights.iter().flatten()) {
            put(format!("raw_weight_{name}"), *v).map_err(fail)?;
        }
    }
    w.flush().map_err(|e| CliError::format("plot data", e.to_string()))
}

#[derive(Default)]
struct PartialRow {
    step: u64,
    losses: Vec<f64>,
    weights: Vec<f64>,
    raw: Vec<f64>,
    objective: Option<f64>,
    dist: Option<f64>,
}

pub fn read_plot_data<R: Read>(input: R) -> Result<RunTable> {
    let bad = |m: String| CliError::format("plot data", m);
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = r.headers().map_err(|e| bad(e.to_string()))?;
    if header != vec!["step", "series", "value"] {
        return Err(bad("header must be `step,series,value`".into()));
    }
    let mut loss_names: Vec<String> = Vec::new();
    let mut partial: Vec<PartialRow> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let line = i + 2;
        let step: u64 = rec[0]
            .parse()
            .map_err(|_| bad(format!("line {line}: `{}` is not a step number", &rec[0])))?;
        let value = parse_float(&rec[2]).ok_or_else(|| bad(format!("line {line}: `{}` is not a number", &rec[2])))?;
        if partial.last().is_none_or(|p| p.step != step) {
            partial.push(PartialRow {
                step,
                ..Default::default()
            });
        }
        let first_row = partial.len() == 1;
        let row = partial.last_mut().expect("pushed above");
        let series = &rec[1];
        if let Some(name) = series.strip_prefix("loss_") {
            if first_row {
                loss_names.push(name.to_string());
            }
            row.losses.push(value);
        } else if series.starts_with("weight_") {
            row.weights.push(value);
        } else if series.starts_with("raw_weight_") {
            row.raw.push(value);
        } else if series == "objective" {
            row.objective = Some(value);
        } else if series == "dist_to_opt" {
            row.dist = Some(value);
        } else {
            return Err(bad(format!("line {line}: unknown series `{series}`")));
        }
    }
    let n = loss_names.len();
    let rows = partial
        .into_iter()
        .map(|p| {
            let complete = p.losses.len() == n && p.weights.len() == n && (p.raw.is_empty() || p.raw.len() == n);
            match (complete, p.objective) {
                (true, Some(objective)) => Ok(RunRow {
                    step: p.step,
                    losses: p.losses,
                    weights: p.weights,
                    raw_weights: (!p.raw.is_empty()).then_some(p.raw),
                    objective,
                    dist_to_opt: p.dist,
                }),
                _ => Err(bad(format!("step {} is incomplete", p.step))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunTable { loss_names, rows })
}

pub fn write_plot_path(table: &RunTable, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_plot_data(table, std::io::BufWriter::new(file))
}

pub fn read_plot_path(path: &Path) -> Result<RunTable> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_plot_data(std::io::BufReader::new(file))
}
