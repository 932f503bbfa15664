//! Command-line interface.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::{Map, Value};
use spherical_core::experiment::{evaluate, ExperimentConfig, Head};
use spherical_core::gradcheck::{run_suite, GradCheckConfig};
use spherical_core::heads::{RegressionLoss, SphereKind};
use spherical_core::metrics::{eval_rotation, EvalReport};
use spherical_core::rotations::{sample_uniform_so3, EulerAngles};
use spherical_core::{DenseVector, Rng};

use crate::format::{fmt_float, read_vectors};
use crate::report::report_dir;
use crate::run::execute_all;

#[derive(Debug, Parser)]
#[command(name = "spherical", version, about = "Spherical regression experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare every analytic derivative against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = GradCheckConfig::default().trials)]
        trials: usize,
        #[arg(long, default_value_t = GradCheckConfig::default().eps)]
        eps: f64,
    },
    /// Draw Haar-uniform rotations as quaternion lines `a b c d`.
    SampleSo3 {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate one head; one run directory per seed.
    Train(TrainArgs),
    /// Score prediction files against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, value_parser = parse_name::<SphereKind>)]
        task: SphereKind,
    },
    /// Aggregate run directories into comparison and variance tables.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_parser = parse_name::<SphereKind>)]
    pub task: Option<SphereKind>,
    #[arg(long, value_parser = parse_name::<Head>)]
    pub head: Option<Head>,
    #[arg(long, value_parser = parse_name::<RegressionLoss>)]
    pub loss: Option<RegressionLoss>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Repeat to run several seeds in parallel.
    #[arg(long = "seed")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    /// Rotation applied to training targets, in degrees (s1/s2 only).
    #[arg(long = "pre-rot")]
    pub pre_rot_deg: Option<f64>,
    /// JSON file with any subset of the config fields; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses a lowercase enum name through its serde representation.
fn parse_name<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn set<T: serde::Serialize>(map: &mut Map<String, Value>, key: &str, value: Option<T>) -> Result<()> {
    if let Some(v) = value {
        map.insert(key.to_string(), serde_json::to_value(v)?);
    }
    Ok(())
}

impl TrainArgs {
    /// Layers defaults ← config file ← flags, one config per seed.
    pub fn configs(&self) -> Result<Vec<ExperimentConfig>> {
        let mut file = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                match serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))? {
                    Value::Object(map) => map,
                    _ => bail!("{}: expected a JSON object", path.display()),
                }
            }
            None => Map::new(),
        };
        set(&mut file, "task", self.task)?;
        set(&mut file, "head", self.head)?;
        set(&mut file, "loss", self.loss)?;
        set(&mut file, "lambda", self.lambda)?;
        set(&mut file, "epochs", self.epochs)?;
        set(&mut file, "batch", self.batch)?;
        set(&mut file, "lr", self.lr)?;
        set(&mut file, "n_train", self.n_train)?;
        set(&mut file, "n_test", self.n_test)?;
        set(&mut file, "noise", self.noise)?;
        set(&mut file, "pre_rotation", self.pre_rot_deg.map(f64::to_radians))?;

        let field = |key: &str| -> Result<Value> {
            file.get(key)
                .cloned()
                .ok_or_else(|| anyhow!("--{key} is required (or set `{key}` in --config)"))
        };
        let task: SphereKind = serde_json::from_value(field("task")?)?;
        let head: Head = serde_json::from_value(field("head")?)?;
        let Value::Object(mut merged) = serde_json::to_value(ExperimentConfig::new(task, head))? else {
            unreachable!("configs serialize to objects");
        };
        merged.extend(file);

        let seeds = if self.seeds.is_empty() {
            vec![merged.get("seed").and_then(Value::as_u64).unwrap_or(0)]
        } else {
            self.seeds.clone()
        };
        seeds
            .into_iter()
            .map(|seed| {
                let mut m = merged.clone();
                m.insert("seed".into(), seed.into());
                let cfg: ExperimentConfig = serde_json::from_value(Value::Object(m)).context("invalid config")?;
                cfg.validate()?;
                Ok(cfg)
            })
            .collect()
    }
}

fn cmd_gradcheck(trials: usize, eps: f64) -> Result<bool> {
    let cfg = GradCheckConfig {
        trials,
        eps,
        ..GradCheckConfig::default()
    };
    let results = run_suite(&cfg)?;
    println!("{:<34} {:>6} {:>7} {:>12} {:>8}  status", "check", "trials", "skipped", "max rel err", "tol");
    for r in &results {
        println!(
            "{:<34} {:>6} {:>7} {:>12.3e} {:>8.0e}  {}",
            r.name,
            r.trials,
            r.skipped,
            r.max_rel_err,
            r.tolerance,
            if r.passed() { "ok" } else { "FAIL" }
        );
    }
    let failed = results.iter().filter(|r| !r.passed()).count();
    println!("{} checks, {failed} failed", results.len());
    Ok(failed == 0)
}

fn cmd_sample_so3(n: usize, seed: u64, out: Option<&Path>) -> Result<()> {
    let mut text = String::with_capacity(n * 48);
    for q in sample_uniform_so3(&mut Rng::new(seed), n) {
        let c = q.components().map(fmt_float);
        text.push_str(&c.join(" "));
        text.push('\n');
    }
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => io::stdout().lock().write_all(text.as_bytes()).map_err(Into::into),
    }
}

/// Scores two vector files. Column counts select the representation:
/// s1 takes `cos sin` (2) or Euler `azimuth elevation inplane` in radians (3),
/// s2 takes unit normals (3), s3 takes quaternions `a b c d` (4).
pub fn eval_files(pred: &Path, gt: &Path, task: SphereKind) -> Result<EvalReport> {
    let p = read_vectors(pred)?;
    let g = read_vectors(gt)?;
    let width = p.first().map_or(0, Vec::len);
    if g.first().map_or(0, Vec::len) != width {
        bail!("prediction and ground-truth files have different widths");
    }
    let to_dense =
        |rows: Vec<Vec<f64>>| rows.into_iter().map(DenseVector::new).collect::<Result<Vec<_>, _>>();
    let report = match (task, width) {
        (SphereKind::S1, 3) => {
            let to_euler = |rows: &[Vec<f64>]| {
                rows.iter()
                    .map(|r| EulerAngles::wrapped(r[0], r[1], r[2]))
                    .collect::<Result<Vec<_>, _>>()
            };
            eval_rotation(&to_euler(&p)?, &to_euler(&g)?)?
        }
        (SphereKind::S1, 2) | (SphereKind::S2, 3) | (SphereKind::S3, 4) => evaluate(task, &to_dense(p)?, &to_dense(g)?)?,
        _ => bail!("{} files with {width} columns are not supported", task.name()),
    };
    Ok(report)
}

pub fn print_report(report: &EvalReport) {
    println!("med_err {}", fmt_float(report.med_err));
    println!("acc_pi6 {}", fmt_float(report.acc_pi6));
    println!("acc_pi12 {}", fmt_float(report.acc_pi12));
    println!("acc_pi24 {}", fmt_float(report.acc_pi24));
    println!("mean_err {}", fmt_float(report.mean_err));
    println!("median_err {}", fmt_float(report.median_err));
    if let Some(n) = report.normals {
        println!("acc_11_25 {}", fmt_float(n.acc_11_25));
        println!("acc_22_5 {}", fmt_float(n.acc_22_5));
        println!("acc_30 {}", fmt_float(n.acc_30));
    }
}

fn cmd_train(args: &TrainArgs) -> Result<bool> {
    let cfgs = args.configs()?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut ok = true;
    for result in execute_all(&cfgs, &args.out) {
        let s = result?;
        match (&s.report, &s.error) {
            (Some(r), _) => println!(
                "{}  med_err {}  acc_pi6 {}  grad_var {}",
                s.dir.display(),
                fmt_float(r.med_err),
                fmt_float(r.acc_pi6),
                fmt_float(s.grad_var)
            ),
            (None, e) => {
                ok = false;
                eprintln!("{}  aborted: {}", s.dir.display(), e.as_deref().unwrap_or("unknown error"));
            }
        }
    }
    Ok(ok)
}

pub fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Gradcheck { trials, eps } => cmd_gradcheck(trials, eps),
        Command::SampleSo3 { n, seed, out } => cmd_sample_so3(n, seed, out.as_deref()).map(|()| true),
        Command::Train(args) => cmd_train(&args),
        Command::Eval { pred, gt, task } => {
            print_report(&eval_files(&pred, &gt, task)?);
            Ok(true)
        }
        Command::Report { dir } => {
            print!("{}", report_dir(&dir)?);
            Ok(true)
        }
    }
}

/// Exit codes: 0 success, 1 a check failed or a run aborted, 2 usage or IO error.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
