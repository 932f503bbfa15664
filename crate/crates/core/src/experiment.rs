//! End-to-end experiment: generate a task, train one head, evaluate.
//!
//! Three head strategies are compared:
//!
//! - `direct`: the regression output `O` is trained against the signed
//!   target with smooth-L1 and normalized at inference; no sign branch.
//! - `flat` / `sexp`: `O` goes through `S_flat` / `S_exp`, the result is
//!   trained against `|Y|`, and a sign-classification branch predicts the
//!   sign pattern; the two are merged at inference.
//!
//! Random streams per seed: 0 = training data, 1 = test data,
//! 2 = minibatch shuffling, 3 = weight initialization. Train and test sets
//! (and initial weights) are therefore shared across heads for a seed.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::activations::ActivationKind;
use crate::data::{apply_pre_rotation, generate, rotate_target, SyntheticDataset};
use crate::heads::{merge_prediction, RegressionLoss, SphereKind};
use crate::metrics::{eval_normals, eval_rotation, normal_errors, EvalReport};
use crate::network::{train, ForwardOutput, MlpModel, Objective, Sample, TrainConfig, TrainRecord};
use crate::numeric::{norm, DenseVector, Rng};
use crate::rotations::Quaternion;
use crate::{Error, Result};

/// Hidden widths of the shared trunk.
pub const HIDDEN: [usize; 3] = [64, 64, 32];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    Direct,
    Flat,
    Sexp,
}

impl Head {
    pub const ALL: [Head; 3] = [Head::Direct, Head::Flat, Head::Sexp];

    pub fn name(self) -> &'static str {
        match self {
            Head::Direct => "direct",
            Head::Flat => "flat",
            Head::Sexp => "sexp",
        }
    }

    pub fn activation(self) -> Option<ActivationKind> {
        match self {
            Head::Direct => None,
            Head::Flat => Some(ActivationKind::SphericalFlat),
            Head::Sexp => Some(ActivationKind::SphericalExp),
        }
    }

    /// The loss each head is normally paired with.
    pub fn default_loss(self) -> RegressionLoss {
        match self {
            Head::Direct => RegressionLoss::SmoothL1,
            Head::Flat | Head::Sexp => RegressionLoss::Cosine,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: SphereKind,
    pub head: Head,
    pub loss: RegressionLoss,
    /// Weight of the sign-classification term (ignored by `direct`).
    pub lambda: f64,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub noise: f64,
    /// Fixed rotation (radians) applied to training targets; S¹/S² only.
    pub pre_rotation: Option<f64>,
}

impl ExperimentConfig {
    pub fn new(task: SphereKind, head: Head) -> Self {
        Self {
            task,
            head,
            loss: head.default_loss(),
            lambda: 1.0,
            epochs: 50,
            batch: 64,
            lr: 0.05,
            seed: 0,
            n_train: 8192,
            n_test: 2048,
            noise: 0.01,
            pre_rotation: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.into()));
        if self.loss == RegressionLoss::SmoothL1 && self.head != Head::Direct {
            return bad("smoothl1 is only valid with head=direct");
        }
        if self.loss == RegressionLoss::Xent2 && self.head != Head::Sexp {
            return bad("xent2 needs strictly positive outputs and is only valid with head=sexp");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and ≥ 0");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be finite and > 0");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise must be finite and ≥ 0");
        }
        if self.epochs == 0 || self.batch == 0 || self.n_train == 0 || self.n_test == 0 {
            return bad("epochs, batch, n_train and n_test must be ≥ 1");
        }
        match self.pre_rotation {
            Some(_) if self.task == SphereKind::S3 => bad("pre-rotation is undefined for s3"),
            Some(a) if !a.is_finite() => bad("pre-rotation must be finite"),
            _ => Ok(()),
        }
    }

    fn objective(&self) -> Objective {
        let lambda = if self.head == Head::Direct { 0.0 } else { self.lambda };
        Objective {
            loss: self.loss,
            lambda,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: EvalReport,
    pub records: Vec<TrainRecord>,
    /// Variance of `grad_o_norm` over every record of the run.
    pub grad_var: f64,
    /// Variance of `grad_o_norm` within each epoch.
    pub epoch_grad_var: Vec<f64>,
    /// Signed predictions on the test split, in the original target frame.
    pub predictions: Vec<DenseVector>,
    pub ground_truth: Vec<DenseVector>,
    pub model: MlpModel,
}

/// Population variance; zero for fewer than two values.
pub fn variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Per-epoch variance of the recorded `grad_o_norm`, in epoch order.
pub fn epoch_variances(records: &[TrainRecord]) -> Vec<f64> {
    records
        .chunk_by(|a, b| a.epoch == b.epoch)
        .map(|chunk| variance(&chunk.iter().map(|r| r.grad_o_norm).collect::<Vec<_>>()))
        .collect()
}

fn to_samples(ds: &SyntheticDataset, head: Head) -> Vec<Sample> {
    ds.features
        .iter()
        .zip(&ds.targets)
        .zip(&ds.raw_targets)
        .map(|((f, t), raw)| Sample {
            features: f.as_slice().to_vec(),
            target: match head {
                Head::Direct => raw.as_slice().to_vec(),
                Head::Flat | Head::Sexp => t.abs.as_slice().to_vec(),
            },
            sign_class: t.sign_class,
        })
        .collect()
}

/// Turns network outputs into a signed point on the sphere.
pub fn decode_prediction(out: &ForwardOutput, head: Head, kind: SphereKind) -> Result<DenseVector> {
    match head {
        Head::Direct => {
            let n = norm(&out.o);
            if n > 0.0 {
                out.o.map(|v| v / n)
            } else {
                // A zero output carries no direction; report the first axis.
                let mut e = alloc::vec![0.0; kind.dims()];
                e[0] = 1.0;
                DenseVector::new(e)
            }
        }
        Head::Flat | Head::Sexp => {
            let abs = out.p.map(libm::fabs)?;
            let class = out
                .logits
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                .0;
            merge_prediction(&abs, class, kind)
        }
    }
}

/// Evaluates signed predictions against ground truth for a task.
pub fn evaluate(kind: SphereKind, preds: &[DenseVector], gts: &[DenseVector]) -> Result<EvalReport> {
    match kind {
        SphereKind::S1 => EvalReport::from_errors(&normal_errors(preds, gts)?),
        SphereKind::S2 => eval_normals(preds, gts),
        SphereKind::S3 => {
            let to_q = |v: &DenseVector| Quaternion::from_unnormalized(v[0], v[1], v[2], v[3]);
            let p = preds.iter().map(to_q).collect::<Result<Vec<_>>>()?;
            let g = gts.iter().map(to_q).collect::<Result<Vec<_>>>()?;
            eval_rotation(&p, &g)
        }
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let kind = cfg.task;
    let mut train_ds = generate(kind, &mut Rng::with_stream(cfg.seed, 0), cfg.n_train, cfg.noise)?;
    let test_ds = generate(kind, &mut Rng::with_stream(cfg.seed, 1), cfg.n_test, cfg.noise)?;
    if let Some(angle) = cfg.pre_rotation {
        train_ds = apply_pre_rotation(train_ds, angle)?;
    }

    let model = MlpModel::new(
        train_ds.feature_dim(),
        &HIDDEN,
        kind,
        cfg.head.activation(),
        &mut Rng::with_stream(cfg.seed, 3),
    )?;
    let train_cfg = TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch,
        lr: cfg.lr,
        seed: cfg.seed,
        objective: cfg.objective(),
    };
    let (mut model, records) = train(model, &to_samples(&train_ds, cfg.head), &train_cfg)?;

    let mut predictions = Vec::with_capacity(test_ds.len());
    for x in &test_ds.features {
        let out = model.forward(x)?;
        let mut y = decode_prediction(&out, cfg.head, kind)?;
        if let Some(angle) = cfg.pre_rotation {
            y = rotate_target(&y, kind, -angle)?;
        }
        predictions.push(y);
    }
    let report = evaluate(kind, &predictions, &test_ds.raw_targets)?;
    let norms: Vec<f64> = records.iter().map(|r| r.grad_o_norm).collect();
    Ok(ExperimentOutput {
        report,
        grad_var: variance(&norms),
        epoch_grad_var: epoch_variances(&records),
        records,
        predictions,
        ground_truth: test_ds.raw_targets,
        model,
    })
}
