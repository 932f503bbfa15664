//! Synthetic S¹ / S² / S³ regression tasks.
//!
//! Features for S¹ and S² are a fixed random linear lift of the target to
//! [`LIFT_DIM`] dimensions; S³ features are the coordinates of a fixed,
//! asymmetric 8-point cloud rotated by the target quaternion. The lifts and
//! the cloud are derived from constant seeds, so every dataset — train or
//! test, any run seed — shares the same feature map.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::heads::{encode_target, SphereKind, SphereTarget};
use crate::numeric::{DenseMatrix, DenseVector, Rng};
use crate::rotations::{quat_to_matrix, sample_uniform_so3};
use crate::{Error, Result};

/// Feature width of the S¹ and S² tasks.
pub const LIFT_DIM: usize = 16;
/// Number of points in the S³ canonical cloud (features are `3 ×` this).
pub const CLOUD_POINTS: usize = 8;

const LIFT_SEED: u64 = 0x5eed_11f7;

/// Canonical cloud: irregular enough that no non-identity rotation maps it
/// onto itself, so features pin down the rotation.
const CLOUD: [[f64; 3]; CLOUD_POINTS] = [
    [1.00, 0.00, 0.00],
    [0.00, 0.80, 0.00],
    [0.00, 0.00, 0.60],
    [-0.70, 0.30, 0.10],
    [0.20, -0.90, 0.40],
    [0.50, 0.50, -0.80],
    [-0.30, -0.40, -0.50],
    [0.90, -0.20, 0.70],
];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub kind: SphereKind,
    pub features: Vec<DenseVector>,
    pub targets: Vec<SphereTarget>,
    /// Signed targets `Y` before the abs/sign decomposition.
    pub raw_targets: Vec<DenseVector>,
}

impl SyntheticDataset {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.first().map_or(0, |f| f.len())
    }

    fn from_raw(kind: SphereKind, features: Vec<DenseVector>, raw: Vec<DenseVector>) -> Result<Self> {
        let targets = raw
            .iter()
            .map(|y| encode_target(y, kind))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind,
            features,
            targets,
            raw_targets: raw,
        })
    }
}

/// The fixed `LIFT_DIM × dims` lift for `kind` (S¹ and S² only).
pub fn lift_matrix(kind: SphereKind) -> DenseMatrix {
    let dims = kind.dims();
    let mut rng = Rng::with_stream(LIFT_SEED, dims as u64);
    let data = rng.normal_vec(LIFT_DIM * dims);
    DenseMatrix::new(LIFT_DIM, dims, data).expect("normal draws are finite")
}

/// The canonical point cloud used by the S³ task.
pub fn canonical_cloud() -> &'static [[f64; 3]; CLOUD_POINTS] {
    &CLOUD
}

fn check_args(n: usize, noise: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::Empty);
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidArgument(alloc::format!(
            "noise must be a finite non-negative number, got {noise}"
        )));
    }
    Ok(())
}

fn lifted(lift: &DenseMatrix, y: &[f64], rng: &mut Rng, noise: f64) -> Result<DenseVector> {
    let mut f = lift.mul_vec(y)?;
    for v in &mut f {
        *v += noise * rng.normal();
    }
    DenseVector::new(f)
}

/// Angles `φ ~ U[−π, π)`, target `[cos φ, sin φ]`.
pub fn gen_s1(rng: &mut Rng, n: usize, noise: f64) -> Result<SyntheticDataset> {
    check_args(n, noise)?;
    let lift = lift_matrix(SphereKind::S1);
    let mut features = Vec::with_capacity(n);
    let mut raw = Vec::with_capacity(n);
    for _ in 0..n {
        let phi = rng.uniform_in(-PI, PI);
        let (s, c) = libm::sincos(phi);
        let y = [c, s];
        features.push(lifted(&lift, &y, rng, noise)?);
        raw.push(DenseVector::from_slice(&y)?);
    }
    SyntheticDataset::from_raw(SphereKind::S1, features, raw)
}

/// Uniform unit normals on the hemisphere `N_z < 0`.
pub fn gen_s2(rng: &mut Rng, n: usize, noise: f64) -> Result<SyntheticDataset> {
    check_args(n, noise)?;
    let lift = lift_matrix(SphereKind::S2);
    let mut features = Vec::with_capacity(n);
    let mut raw = Vec::with_capacity(n);
    while raw.len() < n {
        let g = rng.normal_vec(3);
        let r = libm::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
        if g[2] == 0.0 || r < 1e-12 {
            continue;
        }
        let y = [g[0] / r, g[1] / r, -libm::fabs(g[2]) / r];
        features.push(lifted(&lift, &y, rng, noise)?);
        raw.push(DenseVector::from_slice(&y)?);
    }
    SyntheticDataset::from_raw(SphereKind::S2, features, raw)
}

/// Haar-uniform rotations observed through the rotated canonical cloud.
pub fn gen_s3(rng: &mut Rng, n: usize, noise: f64) -> Result<SyntheticDataset> {
    check_args(n, noise)?;
    let quats = sample_uniform_so3(rng, n);
    let mut features = Vec::with_capacity(n);
    let mut raw = Vec::with_capacity(n);
    for q in quats {
        let r = quat_to_matrix(&q);
        let mut f = Vec::with_capacity(3 * CLOUD_POINTS);
        for p in &CLOUD {
            f.extend(r.apply(*p));
        }
        for v in &mut f {
            *v += noise * rng.normal();
        }
        features.push(DenseVector::new(f)?);
        raw.push(DenseVector::from_slice(&q.components())?);
    }
    SyntheticDataset::from_raw(SphereKind::S3, features, raw)
}

pub fn generate(kind: SphereKind, rng: &mut Rng, n: usize, noise: f64) -> Result<SyntheticDataset> {
    match kind {
        SphereKind::S1 => gen_s1(rng, n, noise),
        SphereKind::S2 => gen_s2(rng, n, noise),
        SphereKind::S3 => gen_s3(rng, n, noise),
    }
}

/// Rotates a single S¹/S² target by `angle` radians (S¹: angle addition,
/// S²: rotation about the z axis). Undefined for S³.
pub fn rotate_target(y: &[f64], kind: SphereKind, angle: f64) -> Result<DenseVector> {
    if y.len() != kind.dims() {
        return Err(Error::LengthMismatch {
            expected: kind.dims(),
            found: y.len(),
        });
    }
    let (s, c) = libm::sincos(angle);
    match kind {
        SphereKind::S1 => DenseVector::new(alloc::vec![c * y[0] - s * y[1], s * y[0] + c * y[1]]),
        SphereKind::S2 => DenseVector::new(alloc::vec![c * y[0] - s * y[1], s * y[0] + c * y[1], y[2]]),
        SphereKind::S3 => Err(Error::InvalidArgument(
            "pre-rotation is only defined for s1 and s2 targets".into(),
        )),
    }
}

/// Rotates every target by a fixed angle and re-encodes the sign classes.
/// Features are untouched; rotating by `−angle` undoes the change.
pub fn apply_pre_rotation(ds: SyntheticDataset, angle: f64) -> Result<SyntheticDataset> {
    if !angle.is_finite() {
        return Err(Error::NonFinite);
    }
    let raw = ds
        .raw_targets
        .iter()
        .map(|y| rotate_target(y, ds.kind, angle))
        .collect::<Result<Vec<_>>>()?;
    SyntheticDataset::from_raw(ds.kind, ds.features, raw)
}
