//! Pose and surface-normal evaluation metrics.
//!
//! Rotation errors are geodesic distances; normal errors are angles between
//! unit vectors. "Accuracy at θ" counts errors strictly below θ.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::numeric::dot_slices;
use crate::rotations::{euler_to_matrix, geodesic_distance, quat_to_matrix, EulerAngles, Quaternion, RotationMatrix};
use crate::{Error, Result};

/// Unit-norm tolerance for [`eval_normals`].
pub const NORMAL_TOL: f64 = 1e-6;

/// Rotation-accuracy thresholds in degrees: π/6, π/12, π/24.
pub const ROTATION_THRESHOLDS_DEG: [f64; 3] = [30.0, 15.0, 7.5];
/// Normal-accuracy thresholds in degrees.
pub const NORMAL_THRESHOLDS_DEG: [f64; 3] = [11.25, 22.5, 30.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalAccuracy {
    pub acc_11_25: f64,
    pub acc_22_5: f64,
    pub acc_30: f64,
}

/// Summary of a set of angular errors (all angles in degrees).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub med_err: f64,
    pub acc_pi6: f64,
    pub acc_pi12: f64,
    pub acc_pi24: f64,
    pub mean_err: f64,
    pub median_err: f64,
    /// Present only for surface-normal evaluations.
    pub normals: Option<NormalAccuracy>,
}

impl EvalReport {
    /// Summarizes per-sample errors given in degrees.
    pub fn from_errors(errors_deg: &[f64]) -> Result<Self> {
        if errors_deg.is_empty() {
            return Err(Error::Empty);
        }
        if errors_deg.iter().any(|e| !e.is_finite()) {
            return Err(Error::NonFinite);
        }
        let median = median(errors_deg);
        let mean = errors_deg.iter().sum::<f64>() / errors_deg.len() as f64;
        let [a6, a12, a24] = ROTATION_THRESHOLDS_DEG.map(|t| fraction_below(errors_deg, t));
        Ok(Self {
            med_err: median,
            acc_pi6: a6,
            acc_pi12: a12,
            acc_pi24: a24,
            mean_err: mean,
            median_err: median,
            normals: None,
        })
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Fraction of `errors` strictly below `threshold`.
pub fn fraction_below(errors: &[f64], threshold: f64) -> f64 {
    errors.iter().filter(|&&e| e < threshold).count() as f64 / errors.len() as f64
}

/// Anything that denotes a 3D rotation.
pub trait AsRotation {
    fn rotation_matrix(&self) -> RotationMatrix;
}

impl AsRotation for RotationMatrix {
    fn rotation_matrix(&self) -> RotationMatrix {
        *self
    }
}

impl AsRotation for Quaternion {
    fn rotation_matrix(&self) -> RotationMatrix {
        quat_to_matrix(self)
    }
}

impl AsRotation for EulerAngles {
    fn rotation_matrix(&self) -> RotationMatrix {
        euler_to_matrix(self)
    }
}

fn check_pair_lengths(a: usize, b: usize) -> Result<()> {
    if a == 0 || b == 0 {
        return Err(Error::Empty);
    }
    if a != b {
        return Err(Error::LengthMismatch { expected: b, found: a });
    }
    Ok(())
}

/// Per-sample geodesic errors in degrees.
pub fn rotation_errors<R: AsRotation>(preds: &[R], gts: &[R]) -> Result<Vec<f64>> {
    check_pair_lengths(preds.len(), gts.len())?;
    Ok(preds
        .iter()
        .zip(gts)
        .map(|(p, g)| geodesic_distance(&g.rotation_matrix(), &p.rotation_matrix()).to_degrees())
        .collect())
}

pub fn eval_rotation<R: AsRotation>(preds: &[R], gts: &[R]) -> Result<EvalReport> {
    EvalReport::from_errors(&rotation_errors(preds, gts)?)
}

/// Per-sample angles between unit vectors, in degrees.
pub fn normal_errors<V: AsRef<[f64]>>(preds: &[V], gts: &[V]) -> Result<Vec<f64>> {
    check_pair_lengths(preds.len(), gts.len())?;
    preds
        .iter()
        .zip(gts)
        .map(|(p, g)| {
            let (p, g) = (p.as_ref(), g.as_ref());
            if p.len() != g.len() {
                return Err(Error::LengthMismatch {
                    expected: g.len(),
                    found: p.len(),
                });
            }
            for v in [p, g] {
                let deviation = libm::fabs(libm::sqrt(dot_slices(v, v)) - 1.0);
                // NaN deviations fail too.
                if deviation.is_nan() || deviation > NORMAL_TOL {
                    return Err(Error::OffManifold {
                        manifold: "unit sphere",
                        deviation,
                    });
                }
            }
            Ok(libm::acos(dot_slices(p, g).clamp(-1.0, 1.0)).to_degrees())
        })
        .collect()
}

pub fn eval_normals<V: AsRef<[f64]>>(preds: &[V], gts: &[V]) -> Result<EvalReport> {
    let errors = normal_errors(preds, gts)?;
    let mut report = EvalReport::from_errors(&errors)?;
    let [a11, a22, a30] = NORMAL_THRESHOLDS_DEG.map(|t| fraction_below(&errors, t));
    report.normals = Some(NormalAccuracy {
        acc_11_25: a11,
        acc_22_5: a22,
        acc_30: a30,
    });
    Ok(report)
}
