//! Per-iteration records (JSON lines) and their CSV projections.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use safelimit_core::Variant;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const ITERATIONS_CSV: &str = "iterations.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const RUNS_DIR: &str = "runs";

pub const ITERATIONS_HEADER: [&str; 12] = [
    "run_id",
    "seed",
    "variant",
    "iteration",
    "t_lim",
    "p_u",
    "delta_pu1",
    "delta_pu2",
    "p_u_pred",
    "expected_damage",
    "mean_return",
    "achieved_kl",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub run_id: String,
    pub seed: u64,
    pub variant: Variant,
    pub d_safe: f64,
    pub iteration: usize,
    pub t_lim: f64,
    pub p_u: f64,
    pub delta_pu1: f64,
    pub delta_pu2: f64,
    pub p_u_pred: f64,
    pub t_lim_next: f64,
    pub expected_damage: f64,
    /// Mean penalty-shaped episode return.
    pub mean_return: f64,
    pub mean_base_return: f64,
    pub achieved_kl: f64,
    pub delta_kl: f64,
    pub stalled: bool,
}

pub fn read_records(path: &Path) -> Result<Vec<IterationRecord>> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| HarnessError::json(path, e))?);
    }
    Ok(out)
}

pub(crate) fn append_record(path: &Path, record: &IterationRecord) -> Result<()> {
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| HarnessError::io(path, e))?;
    let mut line = serde_json::to_string(record).map_err(|e| HarnessError::json(path, e))?;
    line.push('\n');
    file.write_all(line.as_bytes()).map_err(|e| HarnessError::io(path, e))
}

/// Run directories below `root`, sorted by name. `root` may itself be a run.
pub fn run_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    if !root.is_dir() {
        return Err(HarnessError::Missing(format!("run directory {} does not exist", root.display())));
    }
    if root.join(RECORDS_FILE).is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let runs = root.join(RUNS_DIR);
    if !runs.is_dir() {
        return Err(HarnessError::Missing(format!(
            "{} holds neither {RECORDS_FILE} nor a {RUNS_DIR}/ directory",
            root.display()
        )));
    }
    let mut dirs = Vec::new();
    for entry in fs::read_dir(&runs).map_err(|e| HarnessError::io(&runs, e))? {
        let path = entry.map_err(|e| HarnessError::io(&runs, e))?.path();
        if path.join(RECORDS_FILE).is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|source| HarnessError::Csv {
            path: path.to_path_buf(),
            source,
        })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Shortest round-trip formatting, so equal values print equal bytes.
fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn write_iterations_csv(path: &Path, records: &[IterationRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(ITERATIONS_HEADER).map_err(csv_err(path))?;
    for r in records {
        w.write_record([
            r.run_id.clone(),
            r.seed.to_string(),
            r.variant.to_string(),
            r.iteration.to_string(),
            num(r.t_lim),
            num(r.p_u),
            num(r.delta_pu1),
            num(r.delta_pu2),
            num(r.p_u_pred),
            num(r.expected_damage),
            num(r.mean_return),
            num(r.achieved_kl),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub const SUMMARY_HEADER: [&str; 10] = [
    "variant",
    "d_safe",
    "iteration",
    "n_seeds",
    "t_lim_mean",
    "t_lim_var",
    "expected_damage_mean",
    "expected_damage_var",
    "mean_return_mean",
    "mean_return_var",
];

/// Mean and population variance, shifted by the first sample so identical
/// inputs give exactly that value and exactly zero.
fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let k = xs[0];
    let d = xs.iter().map(|x| x - k).sum::<f64>() / n;
    let d2 = xs.iter().map(|x| (x - k) * (x - k)).sum::<f64>() / n;
    (k + d, (d2 - d * d).max(0.0))
}

/// Across-seed mean and variance per (variant, budget, iteration).
pub fn write_summary_csv(path: &Path, records: &[IterationRecord]) -> Result<()> {
    type Key = (Variant, u64, usize);
    let mut groups: BTreeMap<Key, Vec<&IterationRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.variant, r.d_safe.to_bits(), r.iteration))
            .or_default()
            .push(r);
    }
    let mut w = csv_writer(path)?;
    w.write_record(SUMMARY_HEADER).map_err(csv_err(path))?;
    for ((variant, d_bits, iteration), rows) in groups {
        let col = |f: fn(&IterationRecord) -> f64| moments(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
        let (t_mean, t_var) = col(|r| r.t_lim);
        let (d_mean, d_var) = col(|r| r.expected_damage);
        let (r_mean, r_var) = col(|r| r.mean_return);
        w.write_record([
            variant.to_string(),
            num(f64::from_bits(d_bits)),
            iteration.to_string(),
            rows.len().to_string(),
            num(t_mean),
            num(t_var),
            num(d_mean),
            num(d_var),
            num(r_mean),
            num(r_var),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Writes `iterations.csv` into every run below `root` and, when `root`
/// is an experiment directory, an aggregate `summary.csv` next to `runs/`.
pub fn emit_csv(root: &Path) -> Result<Vec<PathBuf>> {
    let dirs = run_dirs(root)?;
    let mut all = Vec::new();
    let mut written = Vec::new();
    for dir in &dirs {
        let records = read_records(&dir.join(RECORDS_FILE))?;
        let path = dir.join(ITERATIONS_CSV);
        write_iterations_csv(&path, &records)?;
        written.push(path);
        all.extend(records);
    }
    if !root.join(RECORDS_FILE).is_file() {
        let path = root.join(SUMMARY_CSV);
        write_summary_csv(&path, &all)?;
        written.push(path);
    }
    Ok(written)
}
