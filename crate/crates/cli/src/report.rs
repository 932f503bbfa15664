//! Aggregates run directories into comparison and gradient-variance tables.
//!
//! `report --dir D` looks at `D` itself and its immediate subdirectories;
//! anything holding a `config.json` and a `report.csv` counts as a run. It
//! writes three files into `D`:
//!
//! - `comparison.csv`: `task,head,loss,runs,failed,med_err_deg,acc_pi6,acc_pi12,acc_pi24`,
//!   metrics averaged over the successful runs (seeds) of each configuration;
//! - `grad_variance.csv`: `task,head,loss,seed,grad_var`, one row per run;
//! - `grad_variance_by_epoch.csv`: `task,head,loss,seed,epoch,grad_var`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use spherical_core::experiment::ExperimentConfig;

use crate::format::fmt_float;

#[derive(Debug, Clone, Deserialize)]
struct ReportRow {
    task: String,
    head: String,
    loss: String,
    med_err_deg: f64,
    acc_pi6: f64,
    acc_pi12: f64,
    acc_pi24: f64,
    grad_var: f64,
}

#[derive(Debug, Clone)]
pub struct RunEntry {
    pub dir: PathBuf,
    pub seed: u64,
    pub task: String,
    pub head: String,
    pub loss: String,
    pub med_err: f64,
    pub acc: [f64; 3],
    pub grad_var: f64,
    pub epoch_grad_var: Vec<f64>,
}

impl RunEntry {
    fn failed(&self) -> bool {
        self.med_err.is_nan()
    }
}

fn read_run(dir: &Path) -> Result<RunEntry> {
    let cfg_text = fs::read_to_string(dir.join("config.json"))?;
    let cfg: ExperimentConfig =
        serde_json::from_str(&cfg_text).with_context(|| format!("{}/config.json", dir.display()))?;
    let mut rdr = csv::Reader::from_path(dir.join("report.csv"))?;
    let row: ReportRow = match rdr.deserialize().next() {
        Some(row) => row.with_context(|| format!("{}/report.csv", dir.display()))?,
        None => bail!("{}/report.csv has no data row", dir.display()),
    };
    let epoch_path = dir.join("epoch_grad_var.csv");
    let epoch_grad_var = if epoch_path.is_file() {
        let mut rdr = csv::Reader::from_path(&epoch_path)?;
        rdr.deserialize::<(usize, f64)>()
            .map(|r| r.map(|(_, v)| v))
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("{}", epoch_path.display()))?
    } else {
        Vec::new()
    };
    Ok(RunEntry {
        dir: dir.to_path_buf(),
        seed: cfg.seed,
        task: row.task,
        head: row.head,
        loss: row.loss,
        med_err: row.med_err_deg,
        acc: [row.acc_pi6, row.acc_pi12, row.acc_pi24],
        grad_var: row.grad_var,
        epoch_grad_var,
    })
}

fn is_run(dir: &Path) -> bool {
    dir.join("config.json").is_file() && dir.join("report.csv").is_file()
}

/// Collects every run in `dir` (or `dir` itself), sorted by directory name.
pub fn collect_runs(dir: &Path) -> Result<Vec<RunEntry>> {
    let mut dirs = Vec::new();
    if is_run(dir) {
        dirs.push(dir.to_path_buf());
    }
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.is_dir() && is_run(&path) {
            dirs.push(path);
        }
    }
    dirs.sort();
    dirs.iter().map(|d| read_run(d)).collect()
}

fn head_rank(head: &str) -> usize {
    ["direct", "flat", "sexp"].iter().position(|h| *h == head).unwrap_or(usize::MAX)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Rendered tables plus their CSV forms.
#[derive(Debug, Clone, Default)]
pub struct Tables {
    pub comparison_csv: String,
    pub grad_variance_csv: String,
    pub grad_variance_by_epoch_csv: String,
    pub text: String,
}

pub fn build_tables(runs: &[RunEntry]) -> Tables {
    let mut groups: BTreeMap<(String, usize, String), Vec<&RunEntry>> = BTreeMap::new();
    for r in runs {
        groups
            .entry((r.task.clone(), head_rank(&r.head), r.loss.clone()))
            .or_default()
            .push(r);
    }

    let mut t = Tables::default();
    t.comparison_csv
        .push_str("task,head,loss,runs,failed,med_err_deg,acc_pi6,acc_pi12,acc_pi24\n");
    let _ = writeln!(
        t.text,
        "{:<5} {:<7} {:<9} {:>4} {:>6} {:>11} {:>8} {:>8} {:>8}",
        "task", "head", "loss", "runs", "failed", "MedErr(°)", "Acc@π/6", "Acc@π/12", "Acc@π/24"
    );
    for ((task, _, loss), members) in &groups {
        let head = &members[0].head;
        let ok: Vec<_> = members.iter().filter(|r| !r.failed()).collect();
        let med = mean(ok.iter().map(|r| r.med_err));
        let acc: Vec<f64> = (0..3).map(|i| mean(ok.iter().map(|r| r.acc[i]))).collect();
        let failed = members.len() - ok.len();
        let _ = writeln!(
            t.comparison_csv,
            "{task},{head},{loss},{},{failed},{},{},{},{}",
            members.len(),
            fmt_float(med),
            fmt_float(acc[0]),
            fmt_float(acc[1]),
            fmt_float(acc[2])
        );
        let _ = writeln!(
            t.text,
            "{task:<5} {head:<7} {loss:<9} {:>4} {failed:>6} {med:>11.2} {:>8.3} {:>8.3} {:>8.3}",
            members.len(),
            acc[0],
            acc[1],
            acc[2]
        );
    }

    t.grad_variance_csv.push_str("task,head,loss,seed,grad_var\n");
    t.grad_variance_by_epoch_csv
        .push_str("task,head,loss,seed,epoch,grad_var\n");
    let _ = writeln!(t.text, "\n{:<5} {:<7} {:<9} {:>6} {:>14}", "task", "head", "loss", "seed", "Var ‖∂L/∂O‖");
    for members in groups.values() {
        let mut members = members.clone();
        members.sort_by_key(|r| r.seed);
        for r in members {
            let (task, head, loss, seed) = (&r.task, &r.head, &r.loss, r.seed);
            let _ = writeln!(t.grad_variance_csv, "{task},{head},{loss},{seed},{}", fmt_float(r.grad_var));
            let _ = writeln!(t.text, "{task:<5} {head:<7} {loss:<9} {seed:>6} {:>14.6e}", r.grad_var);
            for (epoch, v) in r.epoch_grad_var.iter().enumerate() {
                let _ = writeln!(
                    t.grad_variance_by_epoch_csv,
                    "{task},{head},{loss},{seed},{epoch},{}",
                    fmt_float(*v)
                );
            }
        }
    }
    t
}

/// Builds the tables for `dir`, writes the CSVs next to the runs and returns
/// the human-readable rendering.
pub fn report_dir(dir: &Path) -> Result<String> {
    let runs = collect_runs(dir)?;
    if runs.is_empty() {
        bail!("no runs found in {}", dir.display());
    }
    let t = build_tables(&runs);
    fs::write(dir.join("comparison.csv"), &t.comparison_csv)?;
    fs::write(dir.join("grad_variance.csv"), &t.grad_variance_csv)?;
    fs::write(dir.join("grad_variance_by_epoch.csv"), &t.grad_variance_by_epoch_csv)?;
    Ok(t.text)
}
