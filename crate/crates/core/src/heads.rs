//! Absolute-value + sign-class decomposition of sphere targets, and the
//! losses used by the two prediction branches.
//!
//! Sign classes: the free components of a target are taken in position
//! order; component `i` (of `k` free ones) contributes bit `2^(k−1−i)` when it
//! is negative. Exact zeros count as positive.
//!
//! | kind | dims | free components  | fixed component       | classes |
//! |------|------|------------------|-----------------------|---------|
//! | S¹   | 2    | `(cos, sin)`     | none                  | 4       |
//! | S²   | 3    | `(N_x, N_y)`     | `N_z ≤ 0`             | 4       |
//! | S³   | 4    | `(b, c, d)`      | `a ≥ 0`               | 8       |

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::numeric::{norm, DenseVector};
use crate::{Error, Result};

/// Unit-norm tolerance for targets handed to [`encode_target`] and
/// [`merge_prediction`].
pub const TARGET_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SphereKind {
    S1,
    S2,
    S3,
}

impl SphereKind {
    pub const ALL: [SphereKind; 3] = [SphereKind::S1, SphereKind::S2, SphereKind::S3];

    pub fn dims(self) -> usize {
        match self {
            SphereKind::S1 => 2,
            SphereKind::S2 => 3,
            SphereKind::S3 => 4,
        }
    }

    pub fn sign_classes(self) -> usize {
        1 << self.free_components().len()
    }

    pub fn free_components(self) -> &'static [usize] {
        match self {
            SphereKind::S1 => &[0, 1],
            SphereKind::S2 => &[0, 1],
            SphereKind::S3 => &[1, 2, 3],
        }
    }

    /// Component whose sign is fixed by the task, with that sign.
    pub fn fixed_component(self) -> Option<(usize, f64)> {
        match self {
            SphereKind::S1 => None,
            SphereKind::S2 => Some((2, -1.0)),
            SphereKind::S3 => Some((0, 1.0)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SphereKind::S1 => "s1",
            SphereKind::S2 => "s2",
            SphereKind::S3 => "s3",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereTarget {
    pub abs: DenseVector,
    pub sign_class: usize,
    pub kind: SphereKind,
}

/// A loss value with its gradients.
///
/// `grad_abs` is the gradient with respect to the regression-branch output
/// (`|P|` for sphere heads, `O` for direct regression); `grad_logits` the
/// gradient with respect to the sign-classification logits.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub grad_abs: Option<DenseVector>,
    pub grad_logits: Option<DenseVector>,
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::LengthMismatch { expected, found });
    }
    Ok(())
}

fn check_class(class: usize, classes: usize) -> Result<()> {
    if class >= classes {
        return Err(Error::ClassOutOfRange { class, classes });
    }
    Ok(())
}

pub fn encode_target(y: &DenseVector, kind: SphereKind) -> Result<SphereTarget> {
    check_len(kind.dims(), y.len())?;
    let deviation = libm::fabs(y.norm() - 1.0);
    if deviation > TARGET_TOL {
        return Err(Error::OffManifold {
            manifold: "unit sphere",
            deviation,
        });
    }
    if let Some((index, sign)) = kind.fixed_component() {
        if y[index] * sign < 0.0 {
            return Err(Error::FixedSignViolation {
                index,
                value: y[index],
            });
        }
    }
    let sign_class = sign_class_of(y, kind);
    Ok(SphereTarget {
        abs: y.map(libm::fabs)?,
        sign_class,
        kind,
    })
}

pub(crate) fn sign_class_of(y: &[f64], kind: SphereKind) -> usize {
    kind.free_components()
        .iter()
        .fold(0, |class, &i| (class << 1) | usize::from(y[i] < 0.0))
}

/// Sign vector (`±1` per component) of a class; fixed components carry
/// their constrained sign.
pub fn decode_signs(class: usize, kind: SphereKind) -> Result<Vec<f64>> {
    check_class(class, kind.sign_classes())?;
    let mut signs = vec![1.0; kind.dims()];
    if let Some((index, sign)) = kind.fixed_component() {
        signs[index] = sign;
    }
    let free = kind.free_components();
    let k = free.len();
    for (pos, &i) in free.iter().enumerate() {
        if (class >> (k - 1 - pos)) & 1 == 1 {
            signs[i] = -1.0;
        }
    }
    Ok(signs)
}

/// Elementwise `sign · |p|`.
pub fn merge_prediction(abs: &DenseVector, class: usize, kind: SphereKind) -> Result<DenseVector> {
    check_len(kind.dims(), abs.len())?;
    let deviation = libm::fabs(abs.norm() - 1.0);
    if deviation > TARGET_TOL {
        return Err(Error::OffManifold {
            manifold: "unit sphere",
            deviation,
        });
    }
    if let Some(&v) = abs.iter().find(|v| **v < 0.0) {
        return Err(Error::OffManifold {
            manifold: "positive orthant",
            deviation: -v,
        });
    }
    let signs = decode_signs(class, kind)?;
    DenseVector::new(abs.iter().zip(&signs).map(|(a, s)| a * s).collect())
}

/// Regression-branch losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressionLoss {
    /// `−⟨|P|, |Y|⟩`
    Cosine,
    /// `‖|P| − |Y|‖²`
    L2,
    /// `Σ y_i² log(1/p_i²)`
    Xent2,
    /// Smooth-L1 between the raw output and the signed target.
    SmoothL1,
}

impl RegressionLoss {
    pub const ALL: [RegressionLoss; 4] = [
        RegressionLoss::Cosine,
        RegressionLoss::L2,
        RegressionLoss::Xent2,
        RegressionLoss::SmoothL1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RegressionLoss::Cosine => "cosine",
            RegressionLoss::L2 => "l2",
            RegressionLoss::Xent2 => "xent2",
            RegressionLoss::SmoothL1 => "smoothl1",
        }
    }

    /// Value of the loss; writes `∂L/∂pred` into `grad`.
    pub(crate) fn eval_into(self, pred: &[f64], target: &[f64], grad: &mut [f64]) -> Result<f64> {
        match self {
            RegressionLoss::Cosine => {
                let mut value = 0.0;
                for i in 0..pred.len() {
                    value -= pred[i] * target[i];
                    grad[i] = -target[i];
                }
                Ok(value)
            }
            RegressionLoss::L2 => {
                let mut value = 0.0;
                for i in 0..pred.len() {
                    let d = pred[i] - target[i];
                    value += d * d;
                    grad[i] = 2.0 * d;
                }
                Ok(value)
            }
            RegressionLoss::Xent2 => {
                let mut value = 0.0;
                for i in 0..pred.len() {
                    let p = pred[i];
                    if p <= 0.0 {
                        return Err(Error::NonPositive { index: i });
                    }
                    let y2 = target[i] * target[i];
                    value -= 2.0 * y2 * libm::log(p);
                    grad[i] = -2.0 * y2 / p;
                }
                Ok(value)
            }
            RegressionLoss::SmoothL1 => {
                let mut value = 0.0;
                for i in 0..pred.len() {
                    let d = target[i] - pred[i];
                    if libm::fabs(d) <= 1.0 {
                        value += 0.5 * d * d;
                        grad[i] = -d;
                    } else {
                        value += libm::fabs(d) - 0.5;
                        grad[i] = -libm::copysign(1.0, d);
                    }
                }
                Ok(value)
            }
        }
    }

    pub fn evaluate(self, pred: &DenseVector, target: &DenseVector) -> Result<LossValue> {
        check_len(pred.len(), target.len())?;
        let mut grad = vec![0.0; pred.len()];
        let value = self.eval_into(pred, target, &mut grad)?;
        Ok(LossValue {
            value,
            grad_abs: Some(DenseVector::new(grad)?),
            grad_logits: None,
        })
    }
}

pub fn cosine_proximity_loss(abs_p: &DenseVector, abs_y: &DenseVector) -> Result<LossValue> {
    RegressionLoss::Cosine.evaluate(abs_p, abs_y)
}

pub fn l2_sphere_loss(abs_p: &DenseVector, abs_y: &DenseVector) -> Result<LossValue> {
    RegressionLoss::L2.evaluate(abs_p, abs_y)
}

/// Cross-entropy between `Y²` and `P²`; `P` must be strictly positive.
pub fn xent_squares_loss(p: &DenseVector, y: &DenseVector) -> Result<LossValue> {
    RegressionLoss::Xent2.evaluate(p, y)
}

pub fn smooth_l1_loss(o: &DenseVector, y: &DenseVector) -> Result<LossValue> {
    RegressionLoss::SmoothL1.evaluate(o, y)
}

/// `−log softmax(logits)[class]`; writes `softmax(logits) − onehot(class)`
/// into `grad`.
pub(crate) fn sign_xent_into(logits: &[f64], class: usize, grad: &mut [f64]) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (g, &l) in grad.iter_mut().zip(logits) {
        *g = libm::exp(l - m);
        sum += *g;
    }
    for g in grad.iter_mut() {
        *g /= sum;
    }
    grad[class] -= 1.0;
    m + libm::log(sum) - logits[class]
}

pub fn sign_xent_loss(logits: &DenseVector, class: usize) -> Result<LossValue> {
    check_class(class, logits.len())?;
    let mut grad = vec![0.0; logits.len()];
    let value = sign_xent_into(logits, class, &mut grad);
    Ok(LossValue {
        value,
        grad_abs: None,
        grad_logits: Some(DenseVector::new(grad)?),
    })
}

/// `cosine_proximity + λ · sign_xent`.
pub fn joint_loss(
    abs_p: &DenseVector,
    abs_y: &DenseVector,
    logits: &DenseVector,
    class: usize,
    lambda: f64,
) -> Result<LossValue> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(alloc::format!(
            "joint-loss weight must be non-negative, got {lambda}"
        )));
    }
    let reg = cosine_proximity_loss(abs_p, abs_y)?;
    let cls = sign_xent_loss(logits, class)?;
    let grad_logits = cls
        .grad_logits
        .expect("classification gradient")
        .map(|g| lambda * g)?;
    Ok(LossValue {
        value: reg.value + lambda * cls.value,
        grad_abs: reg.grad_abs,
        grad_logits: Some(grad_logits),
    })
}

/// Projects a raw target onto the unit sphere, rejecting zero vectors.
pub(crate) fn unit(y: &[f64]) -> Result<Vec<f64>> {
    let n = norm(y);
    if n == 0.0 {
        return Err(Error::DegenerateDirection);
    }
    Ok(y.iter().map(|v| v / n).collect())
}
