//! Executes experiment configs and writes one directory per run.
//!
//! A run directory is named `{task}_{head}_{loss}_s{seed}_{hash}` where
//! `hash` is the first 8 bytes (hex) of the SHA-256 of the config's JSON,
//! and contains:
//!
//! | file                 | content                                                        |
//! |----------------------|----------------------------------------------------------------|
//! | `config.json`        | the full [`ExperimentConfig`]                                  |
//! | `records.csv`        | `epoch,batch,loss,grad_O_norm`, one row per minibatch          |
//! | `report.csv`         | `task,head,loss,med_err_deg,acc_pi6,acc_pi12,acc_pi24,grad_var` |
//! | `epoch_grad_var.csv` | `epoch,grad_var`                                               |
//! | `eval.json`          | every field of the evaluation report                           |
//! | `pred.txt`, `gt.txt` | signed test predictions and ground truth, one vector per line  |
//! | `model.ckpt`         | trained weights (see [`crate::checkpoint`])                    |
//! | `error.txt`          | only when training aborted; `report.csv` then holds `nan`s     |

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use spherical_core::experiment::{run_experiment, ExperimentConfig, ExperimentOutput};
use spherical_core::metrics::EvalReport;
use spherical_core::network::TrainRecord;

use crate::checkpoint;
use crate::format::{fmt_float, write_vectors};

pub const RECORDS_HEADER: [&str; 4] = ["epoch", "batch", "loss", "grad_O_norm"];
pub const REPORT_HEADER: [&str; 8] = [
    "task",
    "head",
    "loss",
    "med_err_deg",
    "acc_pi6",
    "acc_pi12",
    "acc_pi24",
    "grad_var",
];

/// Outcome of one run, as far as the caller needs it.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub config: ExperimentConfig,
    pub report: Option<EvalReport>,
    pub grad_var: f64,
    /// Set when training or evaluation failed (e.g. a NaN loss).
    pub error: Option<String>,
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    let digest = Sha256::digest(json.as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

pub fn run_dir_name(cfg: &ExperimentConfig) -> String {
    format!(
        "{}_{}_{}_s{}_{}",
        cfg.task.name(),
        cfg.head.name(),
        cfg.loss.name(),
        cfg.seed,
        config_hash(cfg)
    )
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .with_context(|| format!("creating {}", path.display()))
}

pub fn write_records(path: &Path, records: &[TrainRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(RECORDS_HEADER)?;
    for r in records {
        w.write_record([
            r.epoch.to_string(),
            r.batch.to_string(),
            fmt_float(r.loss),
            fmt_float(r.grad_o_norm),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_report(path: &Path, cfg: &ExperimentConfig, report: Option<&EvalReport>, grad_var: f64) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(REPORT_HEADER)?;
    let m = |f: fn(&EvalReport) -> f64| fmt_float(report.map_or(f64::NAN, f));
    w.write_record([
        cfg.task.name().to_string(),
        cfg.head.name().to_string(),
        cfg.loss.name().to_string(),
        m(|r| r.med_err),
        m(|r| r.acc_pi6),
        m(|r| r.acc_pi12),
        m(|r| r.acc_pi24),
        fmt_float(grad_var),
    ])?;
    w.flush()?;
    Ok(())
}

fn write_epoch_variances(path: &Path, vars: &[f64]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["epoch", "grad_var"])?;
    for (epoch, v) in vars.iter().enumerate() {
        w.write_record([epoch.to_string(), fmt_float(*v)])?;
    }
    w.flush()?;
    Ok(())
}

/// Rounds every number in a JSON value to nine significant digits;
/// non-finite numbers cannot be represented and were already `null`.
fn round_json(value: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match value {
        Value::Number(n) if n.is_f64() => {
            let x: f64 = fmt_float(n.as_f64().unwrap_or(f64::NAN)).parse().unwrap_or(f64::NAN);
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_json).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let v = round_json(serde_json::to_value(value)?);
    let mut text = serde_json::to_string_pretty(&v)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_outputs(dir: &Path, cfg: &ExperimentConfig, out: &ExperimentOutput) -> Result<()> {
    write_records(&dir.join("records.csv"), &out.records)?;
    write_report(&dir.join("report.csv"), cfg, Some(&out.report), out.grad_var)?;
    write_epoch_variances(&dir.join("epoch_grad_var.csv"), &out.epoch_grad_var)?;
    write_json(&dir.join("eval.json"), &out.report)?;
    write_vectors(&dir.join("pred.txt"), &out.predictions)?;
    write_vectors(&dir.join("gt.txt"), &out.ground_truth)?;
    checkpoint::save(&out.model, &dir.join("model.ckpt"))
}

/// Runs one config and writes its directory under `out_root`.
///
/// Invalid configs and IO failures are errors; a run that aborts during
/// training is *not* — it is recorded in `report.csv`/`error.txt` and
/// reported through [`RunSummary::error`].
pub fn execute(cfg: &ExperimentConfig, out_root: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    let dir = out_root.join(run_dir_name(cfg));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_json(&dir.join("config.json"), cfg)?;
    let _ = fs::remove_file(dir.join("error.txt"));

    match run_experiment(cfg) {
        Ok(out) => {
            write_outputs(&dir, cfg, &out)?;
            Ok(RunSummary {
                dir,
                config: *cfg,
                report: Some(out.report),
                grad_var: out.grad_var,
                error: None,
            })
        }
        Err(e) => {
            let msg = e.to_string();
            write_report(&dir.join("report.csv"), cfg, None, f64::NAN)?;
            fs::write(dir.join("error.txt"), format!("{msg}\n"))?;
            Ok(RunSummary {
                dir,
                config: *cfg,
                report: None,
                grad_var: f64::NAN,
                error: Some(msg),
            })
        }
    }
}

/// Runs independent configs in parallel, one run per worker. Results are
/// returned in input order.
pub fn execute_all(cfgs: &[ExperimentConfig], out_root: &Path) -> Vec<Result<RunSummary>> {
    cfgs.par_iter().map(|cfg| execute(cfg, out_root)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use spherical_core::experiment::Head;
    use spherical_core::heads::{RegressionLoss, SphereKind};

    fn tiny(task: SphereKind, head: Head) -> ExperimentConfig {
        ExperimentConfig {
            n_train: 64,
            n_test: 16,
            epochs: 2,
            batch: 16,
            ..ExperimentConfig::new(task, head)
        }
    }

    #[test]
    fn hash_depends_on_every_field() {
        let a = tiny(SphereKind::S2, Head::Sexp);
        let b = ExperimentConfig { lr: 0.051, ..a };
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a), config_hash(&a.clone()));
        assert_eq!(config_hash(&a).len(), 16);
        assert!(run_dir_name(&a).starts_with("s2_sexp_cosine_s0_"));
    }

    #[test]
    fn run_directory_is_complete() {
        let root = tempfile::tempdir().unwrap();
        let cfg = tiny(SphereKind::S1, Head::Flat);
        let s = execute(&cfg, root.path()).unwrap();
        assert!(s.error.is_none());
        for f in ["config.json", "records.csv", "report.csv", "epoch_grad_var.csv", "eval.json", "pred.txt", "gt.txt", "model.ckpt"] {
            assert!(s.dir.join(f).is_file(), "{f} missing");
        }
        let records = fs::read_to_string(s.dir.join("records.csv")).unwrap();
        let mut lines = records.lines();
        assert_eq!(lines.next(), Some("epoch,batch,loss,grad_O_norm"));
        assert_eq!(lines.count(), 2 * 4);
        assert!(!records.contains('\r'));
        let report = fs::read_to_string(s.dir.join("report.csv")).unwrap();
        assert!(report.starts_with("task,head,loss,med_err_deg,acc_pi6,acc_pi12,acc_pi24,grad_var\ns1,flat,cosine,"));
        let back: ExperimentConfig = serde_json::from_str(&fs::read_to_string(s.dir.join("config.json")).unwrap()).unwrap();
        assert_eq!(back, cfg);
        let model = checkpoint::load(&s.dir.join("model.ckpt")).unwrap();
        assert_eq!(model.kind(), SphereKind::S1);
    }

    #[test]
    fn invalid_configs_write_nothing() {
        let root = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            loss: RegressionLoss::Xent2,
            ..tiny(SphereKind::S1, Head::Flat)
        };
        assert!(execute(&cfg, root.path()).is_err());
        assert_eq!(fs::read_dir(root.path()).unwrap().count(), 0);
    }

    #[test]
    fn divergent_runs_are_recorded_not_fatal() {
        let root = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            lr: 1e300,
            ..tiny(SphereKind::S2, Head::Direct)
        };
        let s = execute(&cfg, root.path()).unwrap();
        assert!(s.error.is_some());
        assert!(s.dir.join("error.txt").is_file());
        let report = fs::read_to_string(s.dir.join("report.csv")).unwrap();
        assert!(report.lines().nth(1).unwrap().ends_with("nan,nan,nan,nan,nan"));
    }

    #[test]
    fn parallel_execution_keeps_order() {
        let root = tempfile::tempdir().unwrap();
        let cfgs: Vec<_> = (0..3)
            .map(|seed| ExperimentConfig { seed, ..tiny(SphereKind::S3, Head::Sexp) })
            .collect();
        let out = execute_all(&cfgs, root.path());
        for (cfg, s) in cfgs.iter().zip(out) {
            assert_eq!(s.unwrap().config.seed, cfg.seed);
        }
    }
}
