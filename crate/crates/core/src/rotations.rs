//! Rotation representations, the geodesic metric and Haar sampling on SO(3).
//!
//! Euler convention: `R(a, e, t) = R_z(t) · R_x(e) · R_y(a)`, with azimuth `a`
//! about the vertical `y` axis, elevation `e` about `x` and in-plane rotation
//! `t` about the camera axis `z`. Azimuth and in-plane angles live in
//! `[−π, π)`, elevation in `[−π/2, π/2]`.
//!
//! Quaternions are `(a, b, c, d) = a + bi + cj + dk` with the real part first,
//! always stored on the canonical hemisphere `a ≥ 0`. At `a = 0` the first
//! non-zero of `(b, c, d)` is made positive.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use crate::numeric::{DenseMatrix, Rng};
use crate::{Error, Result};

/// Orthogonality / determinant tolerance for [`RotationMatrix`].
pub const ROTATION_TOL: f64 = 1e-9;
/// Unit-norm tolerance accepted by quaternion constructors.
pub const UNIT_TOL: f64 = 1e-9;
/// Elevations within this distance of `±π/2` cannot be decomposed.
pub const GIMBAL_MARGIN: f64 = 1e-6;
/// Below this rotation angle the axis is undefined and reported as `e_x`.
pub const AXIS_EPS: f64 = 1e-9;

/// Wraps an angle into `[−π, π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut y = libm::fmod(x + PI, two_pi);
    if y < 0.0 {
        y += two_pi;
    }
    let y = y - PI;
    if y >= PI {
        y - two_pi
    } else {
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    pub azimuth: f64,
    pub elevation: f64,
    pub inplane: f64,
}

impl EulerAngles {
    pub fn new(azimuth: f64, elevation: f64, inplane: f64) -> Result<Self> {
        for (name, value) in [
            ("azimuth", azimuth),
            ("elevation", elevation),
            ("inplane", inplane),
        ] {
            if !value.is_finite() {
                return Err(Error::AngleOutOfRange { name, value });
            }
        }
        if !(-PI..PI).contains(&azimuth) {
            return Err(Error::AngleOutOfRange {
                name: "azimuth",
                value: azimuth,
            });
        }
        if !(-FRAC_PI_2..=FRAC_PI_2).contains(&elevation) {
            return Err(Error::AngleOutOfRange {
                name: "elevation",
                value: elevation,
            });
        }
        if !(-PI..PI).contains(&inplane) {
            return Err(Error::AngleOutOfRange {
                name: "inplane",
                value: inplane,
            });
        }
        Ok(Self {
            azimuth,
            elevation,
            inplane,
        })
    }

    /// Wraps azimuth and in-plane angles into range; elevation must already be valid.
    pub fn wrapped(azimuth: f64, elevation: f64, inplane: f64) -> Result<Self> {
        Self::new(wrap_angle(azimuth), elevation, wrap_angle(inplane))
    }
}

/// A 3×3 rotation: orthogonal with determinant +1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix([[f64; 3]; 3]);

impl RotationMatrix {
    pub const IDENTITY: RotationMatrix =
        RotationMatrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn new(m: [[f64; 3]; 3]) -> Result<Self> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut ortho: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = m.iter().map(|row| row[i] * row[j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                ortho = ortho.max(libm::fabs(s - target));
            }
        }
        let det = det3(&m);
        if ortho > ROTATION_TOL || libm::fabs(det - 1.0) > ROTATION_TOL {
            return Err(Error::InvalidRotation { ortho, det });
        }
        Ok(Self(m))
    }

    pub fn from_dense(m: &DenseMatrix) -> Result<Self> {
        if m.rows() != 3 || m.cols() != 3 {
            return Err(Error::LengthMismatch {
                expected: 9,
                found: m.rows() * m.cols(),
            });
        }
        let mut a = [[0.0; 3]; 3];
        for (r, row) in a.iter_mut().enumerate() {
            row.copy_from_slice(m.row(r));
        }
        Self::new(a)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::new(3, 3, self.0.iter().flatten().copied().collect())
            .expect("rotation entries are finite")
    }

    pub fn rows(&self) -> &[[f64; 3]; 3] {
        &self.0
    }

    pub fn about_x(angle: f64) -> Self {
        let (s, c) = libm::sincos(angle);
        Self([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    }

    pub fn about_y(angle: f64) -> Self {
        let (s, c) = libm::sincos(angle);
        Self([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    }

    pub fn about_z(angle: f64) -> Self {
        let (s, c) = libm::sincos(angle);
        Self([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        let mut t = [[0.0; 3]; 3];
        for (i, row) in t.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = m[j][i];
            }
        }
        Self(t)
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &Self) -> Self {
        let (a, b) = (&self.0, &other.0);
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
            }
        }
        Self(out)
    }

    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        let m = &self.0;
        let s = libm::sqrt(
            (m[2][1] - m[1][2]) * (m[2][1] - m[1][2])
                + (m[0][2] - m[2][0]) * (m[0][2] - m[2][0])
                + (m[1][0] - m[0][1]) * (m[1][0] - m[0][1]),
        );
        // 2 sin θ = s, 2 cos θ = tr − 1
        libm::atan2(s, self.trace() - 1.0)
    }

    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let d = self.0[i][j] - other.0[i][j];
                s += d * d;
            }
        }
        libm::sqrt(s)
    }
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Unit quaternion on the canonical hemisphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 0.0,
    };

    /// Accepts components within [`UNIT_TOL`] of unit norm, renormalizes and
    /// folds onto the canonical hemisphere.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let n = libm::sqrt(a * a + b * b + c * c + d * d);
        if !n.is_finite() {
            return Err(Error::NonFinite);
        }
        if libm::fabs(n - 1.0) > UNIT_TOL {
            return Err(Error::OffManifold {
                manifold: "unit quaternion sphere",
                deviation: libm::fabs(n - 1.0),
            });
        }
        Ok(Self::canonical_unchecked([a / n, b / n, c / n, d / n]))
    }

    /// Normalizes any non-zero 4-vector.
    pub fn from_unnormalized(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let n = libm::sqrt(a * a + b * b + c * c + d * d);
        if !n.is_finite() {
            return Err(Error::NonFinite);
        }
        if n == 0.0 {
            return Err(Error::DegenerateDirection);
        }
        Ok(Self::canonical_unchecked([a / n, b / n, c / n, d / n]))
    }

    fn canonical_unchecked(q: [f64; 4]) -> Self {
        let flip = if q[0] != 0.0 {
            q[0] < 0.0
        } else {
            q[1..].iter().find(|v| **v != 0.0).is_some_and(|v| *v < 0.0)
        };
        let s = if flip { -1.0 } else { 1.0 };
        // `0.0 * -1.0` is `-0.0`; add zero to keep signs of zeros positive.
        Self {
            a: s * q[0] + 0.0,
            b: s * q[1] + 0.0,
            c: s * q[2] + 0.0,
            d: s * q[3] + 0.0,
        }
    }

    pub fn components(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.a * other.a + self.b * other.b + self.c * other.c + self.d * other.d
    }

    /// Hamilton product, re-canonicalized.
    pub fn mul(&self, other: &Self) -> Self {
        let p = hamilton(self.components(), other.components());
        Self::from_unnormalized(p[0], p[1], p[2], p[3]).expect("product of unit quaternions")
    }

    pub fn conjugate(&self) -> Self {
        Self::canonical_unchecked([self.a, -self.b, -self.c, -self.d])
    }
}

/// Raw Hamilton product of `(a, b, c, d)` quaternions.
pub fn hamilton(p: [f64; 4], q: [f64; 4]) -> [f64; 4] {
    [
        p[0] * q[0] - p[1] * q[1] - p[2] * q[2] - p[3] * q[3],
        p[0] * q[1] + p[1] * q[0] + p[2] * q[3] - p[3] * q[2],
        p[0] * q[2] - p[1] * q[3] + p[2] * q[0] + p[3] * q[1],
        p[0] * q[3] + p[1] * q[2] - p[2] * q[1] + p[3] * q[0],
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisAngle {
    axis: [f64; 3],
    angle: f64,
}

impl AxisAngle {
    /// `axis` is normalized (it must be non-zero and within [`UNIT_TOL`] of
    /// unit length); `angle` must lie in `[0, π]`.
    pub fn new(axis: [f64; 3], angle: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&angle) {
            return Err(Error::AngleOutOfRange {
                name: "angle",
                value: angle,
            });
        }
        let n = libm::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
        if !n.is_finite() {
            return Err(Error::NonFinite);
        }
        if libm::fabs(n - 1.0) > UNIT_TOL {
            return Err(Error::OffManifold {
                manifold: "unit axis sphere",
                deviation: libm::fabs(n - 1.0),
            });
        }
        Ok(Self {
            axis: [axis[0] / n, axis[1] / n, axis[2] / n],
            angle,
        })
    }

    pub fn axis(&self) -> [f64; 3] {
        self.axis
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }
}

pub fn euler_to_matrix(ang: &EulerAngles) -> RotationMatrix {
    RotationMatrix::about_z(ang.inplane)
        .compose(&RotationMatrix::about_x(ang.elevation))
        .compose(&RotationMatrix::about_y(ang.azimuth))
}

pub fn matrix_to_euler(r: &RotationMatrix) -> Result<EulerAngles> {
    let m = r.rows();
    // third row is [−cos e · sin a, sin e, cos e · cos a]
    let elevation = libm::atan2(m[2][1], libm::hypot(m[2][0], m[2][2]));
    if libm::fabs(elevation) >= FRAC_PI_2 - GIMBAL_MARGIN {
        return Err(Error::GimbalLock { elevation });
    }
    let azimuth = libm::atan2(-m[2][0], m[2][2]);
    // second column is [−sin t · cos e, cos t · cos e, sin e]
    let inplane = libm::atan2(-m[0][1], m[1][1]);
    EulerAngles::wrapped(azimuth, elevation, inplane)
}

/// Rotation matrix of a unit 4-vector `(a, b, c, d)` without hemisphere folding.
pub fn unit_quaternion_matrix(q: [f64; 4]) -> Result<RotationMatrix> {
    let n = libm::sqrt(q.iter().map(|v| v * v).sum());
    if libm::fabs(n - 1.0) > UNIT_TOL || !n.is_finite() {
        return Err(Error::OffManifold {
            manifold: "unit quaternion sphere",
            deviation: libm::fabs(n - 1.0),
        });
    }
    let [a, b, c, d] = q;
    Ok(RotationMatrix([
        [
            a * a + b * b - c * c - d * d,
            2.0 * (b * c - a * d),
            2.0 * (b * d + a * c),
        ],
        [
            2.0 * (b * c + a * d),
            a * a - b * b + c * c - d * d,
            2.0 * (c * d - a * b),
        ],
        [
            2.0 * (b * d - a * c),
            2.0 * (c * d + a * b),
            a * a - b * b - c * c + d * d,
        ],
    ]))
}

pub fn quat_to_matrix(q: &Quaternion) -> RotationMatrix {
    unit_quaternion_matrix(q.components()).expect("quaternion is unit")
}

pub fn matrix_to_quat(r: &RotationMatrix) -> Quaternion {
    let m = r.rows();
    let tr = r.trace();
    // largest-pivot branch keeps the square root well away from zero
    let q = if tr >= m[0][0] && tr >= m[1][1] && tr >= m[2][2] {
        let s = 2.0 * libm::sqrt(1.0 + tr);
        [
            0.25 * s,
            (m[2][1] - m[1][2]) / s,
            (m[0][2] - m[2][0]) / s,
            (m[1][0] - m[0][1]) / s,
        ]
    } else if m[0][0] >= m[1][1] && m[0][0] >= m[2][2] {
        let s = 2.0 * libm::sqrt(1.0 + m[0][0] - m[1][1] - m[2][2]);
        [
            (m[2][1] - m[1][2]) / s,
            0.25 * s,
            (m[0][1] + m[1][0]) / s,
            (m[0][2] + m[2][0]) / s,
        ]
    } else if m[1][1] >= m[2][2] {
        let s = 2.0 * libm::sqrt(1.0 + m[1][1] - m[0][0] - m[2][2]);
        [
            (m[0][2] - m[2][0]) / s,
            (m[0][1] + m[1][0]) / s,
            0.25 * s,
            (m[1][2] + m[2][1]) / s,
        ]
    } else {
        let s = 2.0 * libm::sqrt(1.0 + m[2][2] - m[0][0] - m[1][1]);
        [
            (m[1][0] - m[0][1]) / s,
            (m[0][2] + m[2][0]) / s,
            (m[1][2] + m[2][1]) / s,
            0.25 * s,
        ]
    };
    Quaternion::from_unnormalized(q[0], q[1], q[2], q[3]).expect("rotation matrix is valid")
}

pub fn axis_angle_to_quat(aa: &AxisAngle) -> Quaternion {
    let (s, c) = libm::sincos(aa.angle / 2.0);
    let [x, y, z] = aa.axis;
    Quaternion::from_unnormalized(c, s * x, s * y, s * z).expect("axis and angle are valid")
}

/// `θ = 2·arccos(a)`; below [`AXIS_EPS`] the axis is reported as `e_x`.
pub fn quat_to_axis_angle(q: &Quaternion) -> AxisAngle {
    let [a, b, c, d] = q.components();
    let v = libm::sqrt(b * b + c * c + d * d);
    // atan2 form of 2·arccos(a), accurate for a near 1
    let angle = 2.0 * libm::atan2(v, a);
    if angle < AXIS_EPS {
        return AxisAngle {
            axis: [1.0, 0.0, 0.0],
            angle: 0.0,
        };
    }
    AxisAngle {
        axis: [b / v, c / v, d / v],
        angle: angle.min(PI),
    }
}

/// Angle of `R_gtᵀ · R_pr`, in `[0, π]`.
///
/// Equals `‖log(R_gtᵀ R_pr)‖_F / √2` and `arccos((tr − 1) / 2)`; evaluated as
/// `atan2` of the antisymmetric and trace parts so it stays accurate near 0 and π.
pub fn geodesic_distance(r_gt: &RotationMatrix, r_pr: &RotationMatrix) -> f64 {
    r_gt.transpose().compose(r_pr).angle()
}

/// `n` Haar-uniform rotations: four standard normals normalized onto S³ and
/// folded onto the canonical hemisphere.
pub fn sample_uniform_so3(rng: &mut Rng, n: usize) -> Vec<Quaternion> {
    (0..n).map(|_| sample_one(rng)).collect()
}

fn sample_one(rng: &mut Rng) -> Quaternion {
    loop {
        let (a, b, c, d) = (rng.normal(), rng.normal(), rng.normal(), rng.normal());
        if let Ok(q) = Quaternion::from_unnormalized(a, b, c, d) {
            return q;
        }
    }
}
