//! Per-run CSV files.
//!
//! Header: `step,loss_<name>...,weight_<name>...,objective,dist_to_opt`,
//! followed by `raw_weight_<name>...` for strategies whose weights are not
//! normalized. `dist_to_opt` is empty when the optimum is unknown. Floats
//! use the shortest representation that parses back to the same bits.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use covbalance_core::harness::RunRow;
use covbalance_core::RunRecord;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunTable {
    pub loss_names: Vec<String>,
    pub rows: Vec<RunRow>,
}

pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

pub fn parse_float(s: &str) -> Option<f64> {
    s.trim().parse().ok()
}

/// Pyramid level encoded in a multiscale loss name (`..._s<k>`), 0 otherwise.
pub fn scale_of(name: &str) -> u32 {
    name.rsplit_once("_s")
        .and_then(|(_, k)| k.parse().ok())
        .unwrap_or(0)
}

impl RunTable {
    pub fn from_record(record: &RunRecord) -> Self {
        Self {
            loss_names: record.labels.iter().map(|l| l.name.clone()).collect(),
            rows: record.rows.clone(),
        }
    }

    pub fn has_raw_weights(&self) -> bool {
        self.rows.first().is_some_and(|r| r.raw_weights.is_some())
    }

    pub fn header(&self) -> Vec<String> {
        let names = &self.loss_names;
        let mut h = vec!["step".to_string()];
        h.extend(names.iter().map(|n| format!("loss_{n}")));
        h.extend(names.iter().map(|n| format!("weight_{n}")));
        h.push("objective".into());
        h.push("dist_to_opt".into());
        if self.has_raw_weights() {
            h.extend(names.iter().map(|n| format!("raw_weight_{n}")));
        }
        h
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let raw = self.has_raw_weights();
        let mut w = csv::Writer::from_writer(out);
        let fail = |e: csv::Error| CliError::format("run CSV", e.to_string());
        w.write_record(self.header()).map_err(fail)?;
        for row in &self.rows {
            if row.raw_weights.is_some() != raw {
                return Err(CliError::format("run CSV", "raw weights present on some rows only"));
            }
            let mut rec = vec![row.step.to_string()];
            rec.extend(row.losses.iter().copied().map(format_float));
            rec.extend(row.weights.iter().copied().map(format_float));
            rec.push(format_float(row.objective));
            rec.push(row.dist_to_opt.map(format_float).unwrap_or_default());
            if let Some(rw) = &row.raw_weights {
                rec.extend(rw.iter().copied().map(format_float));
            }
            w.write_record(&rec).map_err(fail)?;
        }
        w.flush().map_err(|e| CliError::format("run CSV", e.to_string()))
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let bad = |m: String| CliError::format("run CSV", m);
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let header: Vec<String> = r
            .headers()
            .map_err(|e| bad(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let (loss_names, raw) = parse_header(&header).map_err(bad)?;
        let n = loss_names.len();
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let line = i + 2;
            let num = |j: usize| -> Result<f64> {
                parse_float(&rec[j]).ok_or_else(|| bad(format!("line {line}: `{}` is not a number", &rec[j])))
            };
            let nums = |from: usize| -> Result<Vec<f64>> { (from..from + n).map(num).collect() };
            let step = rec[0]
                .parse()
                .map_err(|_| bad(format!("line {line}: `{}` is not a step number", &rec[0])))?;
            let dist = &rec[2 * n + 2];
            rows.push(RunRow {
                step,
                losses: nums(1)?,
                weights: nums(1 + n)?,
                objective: num(2 * n + 1)?,
                dist_to_opt: if dist.is_empty() { None } else { Some(num(2 * n + 2)?) },
                raw_weights: if raw { Some(nums(2 * n + 3)?) } else { None },
            });
        }
        Ok(Self { loss_names, rows })
    }

    pub fn write_path(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        Self::read_from(std::io::BufReader::new(file)).map_err(|e| match e {
            CliError::Format { message, .. } => CliError::format(path.display().to_string(), message),
            other => other,
        })
    }

    /// Normalized weight summed per scale and averaged over rows, with the
    /// scale read from each loss name.
    pub fn scale_weight_profile(&self) -> Vec<f64> {
        let scales: Vec<usize> = self.loss_names.iter().map(|n| scale_of(n) as usize).collect();
        let mut profile = vec![0.0; scales.iter().max().map_or(0, |s| s + 1)];
        if self.rows.is_empty() {
            return profile;
        }
        for row in &self.rows {
            for (w, s) in row.weights.iter().zip(&scales) {
                profile[*s] += w;
            }
        }
        let n = self.rows.len() as f64;
        profile.iter_mut().for_each(|p| *p /= n);
        profile
    }
}

/// Loss names and whether raw-weight columns follow.
fn parse_header(h: &[String]) -> std::result::Result<(Vec<String>, bool), String> {
    if h.first().map(String::as_str) != Some("step") {
        return Err("first column must be `step`".into());
    }
    let names: Vec<String> = h[1..]
        .iter()
        .map_while(|c| c.strip_prefix("loss_").map(str::to_string))
        .collect();
    let n = names.len();
    let mut expected: Vec<String> = vec!["step".into()];
    expected.extend(names.iter().map(|x| format!("loss_{x}")));
    expected.extend(names.iter().map(|x| format!("weight_{x}")));
    expected.push("objective".into());
    expected.push("dist_to_opt".into());
    let raw = h.len() == expected.len() + n && n > 0;
    if raw {
        expected.extend(names.iter().map(|x| format!("raw_weight_{x}")));
    }
    if n == 0 || h != expected.as_slice() {
        return Err(format!("unexpected header `{}`", h.join(",")));
    }
    Ok((names, raw))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(raw: bool) -> RunTable {
        RunTable {
            loss_names: vec!["l1_s0".into(), "disp_s3".into()],
            rows: (1..=3)
                .map(|s| RunRow {
                    step: s,
                    losses: vec![0.1 * s as f64, 1e-300],
                    weights: vec![1.0 / 3.0, 2.0 / 3.0],
                    raw_weights: raw.then(|| vec![0.5, f64::MAX]),
                    objective: 1e20 + s as f64,
                    dist_to_opt: (s != 2).then_some(f64::MIN_POSITIVE),
                })
                .collect(),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        for raw in [false, true] {
            let t = table(raw);
            let mut buf = Vec::new();
            t.write_to(&mut buf).unwrap();
            assert_eq!(RunTable::read_from(buf.as_slice()).unwrap(), t);
        }
    }

    #[test]
    fn header_layout() {
        assert_eq!(
            table(true).header().join(","),
            "step,loss_l1_s0,loss_disp_s3,weight_l1_s0,weight_disp_s3,objective,dist_to_opt,\
             raw_weight_l1_s0,raw_weight_disp_s3"
        );
    }

    #[test]
    fn rejects_bad_files() {
        assert!(RunTable::read_from("a,b\n1,2\n".as_bytes()).is_err());
        assert!(RunTable::read_from("step,loss_a,weight_b,objective,dist_to_opt\n".as_bytes()).is_err());
        assert!(RunTable::read_from("step,loss_a,weight_a,objective,dist_to_opt\n1,x,1,1,\n".as_bytes()).is_err());
    }

    #[test]
    fn scales_from_names() {
        assert_eq!(scale_of("disp_right_s3"), 3);
        assert_eq!(scale_of("q0"), 0);
        assert_eq!(table(false).scale_weight_profile(), vec![1.0 / 3.0, 0.0, 0.0, 2.0 / 3.0]);
    }
}
