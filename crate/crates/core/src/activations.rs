//! Output activations and their analytic Jacobians.
//!
//! | kind            | forward                         | Jacobian `∂p_j/∂o_i`          |
//! |-----------------|---------------------------------|-------------------------------|
//! | `Softmax`       | `e^{o_j} / Σ_k e^{o_k}`         | `diag(P) − P⊗P`               |
//! | `SphericalFlat` | `o_j / ‖O‖`                     | `(I − P⊗P) / ‖O‖`             |
//! | `SphericalExp`  | `e^{o_j} / √(Σ_k e^{2 o_k})`    | `(I − P⊗P) · diag(P)`         |
//!
//! The softmax and spherical-exponential Jacobians are functions of `P`
//! alone; the flat one needs `‖O‖` as well.

use alloc::vec;

use serde::{Deserialize, Serialize};

use crate::numeric::{fd_jacobian, norm, DenseMatrix, DenseVector};
use crate::{Error, Result};

/// Tolerance for Jacobian entry points that take `P` instead of `O`.
pub const MANIFOLD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActivationKind {
    Softmax,
    SphericalFlat,
    SphericalExp,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 3] = [
        ActivationKind::Softmax,
        ActivationKind::SphericalFlat,
        ActivationKind::SphericalExp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Softmax => "softmax",
            ActivationKind::SphericalFlat => "sflat",
            ActivationKind::SphericalExp => "sexp",
        }
    }

    pub fn forward(self, o: &DenseVector) -> Result<DenseVector> {
        match self {
            ActivationKind::Softmax => Ok(softmax_forward(o)),
            ActivationKind::SphericalFlat => sflat_forward(o),
            ActivationKind::SphericalExp => Ok(sexp_forward(o)),
        }
    }

    /// Analytic Jacobian at `O` (with `P = forward(O)`).
    pub fn jacobian(self, o: &DenseVector) -> Result<DenseMatrix> {
        match self {
            ActivationKind::Softmax => softmax_jacobian(&softmax_forward(o)),
            ActivationKind::SphericalFlat => sflat_jacobian(o),
            ActivationKind::SphericalExp => sexp_jacobian(&sexp_forward(o)),
        }
    }

    pub(crate) fn forward_into(self, o: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            ActivationKind::Softmax => softmax_into(o, out),
            ActivationKind::SphericalFlat => sflat_into(o, out)?,
            ActivationKind::SphericalExp => sexp_into(o, out),
        }
        Ok(())
    }

    /// Vector-Jacobian product `Jᵀ·g`, i.e. `∂L/∂O` given `∂L/∂P = g`.
    pub(crate) fn vjp_into(self, o: &[f64], p: &[f64], g: &[f64], out: &mut [f64]) {
        let pg: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
        match self {
            // (diag(P) − PPᵀ)ᵀ g = P ⊙ (g − P·g)
            ActivationKind::Softmax => {
                for i in 0..out.len() {
                    out[i] = p[i] * (g[i] - pg);
                }
            }
            // (I − PPᵀ) g / ‖O‖
            ActivationKind::SphericalFlat => {
                let n = norm(o);
                for i in 0..out.len() {
                    out[i] = (g[i] - p[i] * pg) / n;
                }
            }
            // diag(P) (I − PPᵀ) g
            ActivationKind::SphericalExp => {
                for i in 0..out.len() {
                    out[i] = p[i] * (g[i] - p[i] * pg);
                }
            }
        }
    }
}

fn max_of(o: &[f64]) -> f64 {
    o.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn softmax_into(o: &[f64], out: &mut [f64]) {
    let m = max_of(o);
    let mut sum = 0.0;
    for (p, &x) in out.iter_mut().zip(o) {
        *p = libm::exp(x - m);
        sum += *p;
    }
    for p in out.iter_mut() {
        *p /= sum;
    }
}

fn sexp_into(o: &[f64], out: &mut [f64]) {
    let m = max_of(o);
    let mut sq = 0.0;
    for (p, &x) in out.iter_mut().zip(o) {
        *p = libm::exp(x - m);
        sq += *p * *p;
    }
    let a = libm::sqrt(sq);
    for p in out.iter_mut() {
        *p /= a;
    }
}

fn sflat_into(o: &[f64], out: &mut [f64]) -> Result<()> {
    let n = norm(o);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::DegenerateDirection);
    }
    for (p, &x) in out.iter_mut().zip(o) {
        *p = x / n;
    }
    Ok(())
}

pub fn softmax_forward(o: &DenseVector) -> DenseVector {
    let mut out = vec![0.0; o.len()];
    softmax_into(o, &mut out);
    DenseVector::from_vec_unchecked(out)
}

fn check_simplex(p: &[f64]) -> Result<()> {
    let sum: f64 = p.iter().sum();
    let worst_neg = p.iter().copied().fold(0.0, f64::min);
    let deviation = libm::fabs(sum - 1.0).max(-worst_neg);
    if deviation > MANIFOLD_TOL {
        return Err(Error::OffManifold {
            manifold: "probability simplex",
            deviation,
        });
    }
    Ok(())
}

fn check_sphere(p: &[f64]) -> Result<()> {
    let deviation = libm::fabs(norm(p) - 1.0);
    if deviation > MANIFOLD_TOL {
        return Err(Error::OffManifold {
            manifold: "unit sphere",
            deviation,
        });
    }
    Ok(())
}

/// Softmax Jacobian from `P` alone.
pub fn softmax_jacobian(p: &DenseVector) -> Result<DenseMatrix> {
    check_simplex(p)?;
    let n = p.len();
    let mut j = DenseMatrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            j[(r, c)] = if r == c {
                p[r] * (1.0 - p[r])
            } else {
                -p[c] * p[r]
            };
        }
    }
    Ok(j)
}

/// `∂L/∂O = P − Y` for cross-entropy composed with softmax.
pub fn softmax_xent_grad(p: &DenseVector, y: &DenseVector) -> Result<DenseVector> {
    if p.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: p.len(),
            found: y.len(),
        });
    }
    check_simplex(p)?;
    DenseVector::new(p.iter().zip(y.iter()).map(|(a, b)| a - b).collect())
}

pub fn sflat_forward(o: &DenseVector) -> Result<DenseVector> {
    let mut out = vec![0.0; o.len()];
    sflat_into(o, &mut out)?;
    DenseVector::new(out)
}

/// `(I − P⊗P) / ‖O‖`; grows without bound as `‖O‖ → 0`.
pub fn sflat_jacobian(o: &DenseVector) -> Result<DenseMatrix> {
    let p = sflat_forward(o)?;
    let n = o.norm();
    let mut j = projector(&p);
    for v in j.as_mut_slice() {
        *v /= n;
    }
    if j.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(j)
}

pub fn sexp_forward(o: &DenseVector) -> DenseVector {
    let mut out = vec![0.0; o.len()];
    sexp_into(o, &mut out);
    DenseVector::from_vec_unchecked(out)
}

/// `(I − P⊗P) · diag(P)`, from `P` alone.
pub fn sexp_jacobian(p: &DenseVector) -> Result<DenseMatrix> {
    check_sphere(p)?;
    if let Some(index) = p.iter().position(|&v| v < 0.0) {
        return Err(Error::OffManifold {
            manifold: "positive orthant",
            deviation: -p[index],
        });
    }
    let n = p.len();
    let mut j = projector(p);
    for r in 0..n {
        for c in 0..n {
            j[(r, c)] *= p[c];
        }
    }
    Ok(j)
}

/// `I − P⊗P`
fn projector(p: &[f64]) -> DenseMatrix {
    let n = p.len();
    let mut m = DenseMatrix::identity(n);
    for r in 0..n {
        for c in 0..n {
            m[(r, c)] -= p[r] * p[c];
        }
    }
    m
}

/// Max elementwise relative error between the analytic Jacobian of `kind`
/// at `O` and a central-difference Jacobian with step `eps`.
pub fn grad_check(kind: ActivationKind, o: &DenseVector, eps: f64) -> Result<f64> {
    let analytic = kind.jacobian(o)?;
    let numeric = fd_jacobian(|x| kind.forward(x), o, eps)?;
    Ok(analytic.max_relative_error(&numeric))
}

/// Spectral norm of the Jacobian at `O`.
pub fn jacobian_spectral_norm(kind: ActivationKind, o: &DenseVector) -> Result<f64> {
    Ok(kind.jacobian(o)?.spectral_norm())
}
