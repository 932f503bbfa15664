//! Dense linear algebra, seeded randomness and the finite-difference oracle.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Deref, Index, IndexMut};

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Default step for central differences at f64.
pub const DEFAULT_FD_EPS: f64 = 1e-5;

/// Denominator floor used by [`relative_error`]; below it errors are
/// effectively measured in absolute terms.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-4;

/// A non-empty vector of finite `f64`s.
#[derive(Clone, PartialEq)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty);
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(data))
    }

    pub fn from_slice(data: &[f64]) -> Result<Self> {
        Self::new(data.to_vec())
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::new(vec![0.0; len])
    }

    /// Wraps data the caller has already validated.
    pub(crate) fn from_vec_unchecked(data: Vec<f64>) -> Self {
        debug_assert!(!data.is_empty() && data.iter().all(|v| v.is_finite()));
        Self(data)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.0.iter().map(|&v| f(v)).collect())
    }
}

impl Deref for DenseVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for DenseVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl fmt::Debug for DenseVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl TryFrom<Vec<f64>> for DenseVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

/// Row-major dense matrix of finite `f64`s.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty);
        }
        if rows * cols != data.len() {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::LengthMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::LengthMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                for c in 0..other.cols {
                    out[(r, c)] += a * other[(k, c)];
                }
            }
        }
        Ok(out)
    }

    /// `self · v`
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::LengthMismatch {
                expected: self.cols,
                found: v.len(),
            });
        }
        Ok((0..self.rows).map(|r| dot_slices(self.row(r), v)).collect())
    }

    /// `selfᵀ · v`
    pub fn tr_mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(Error::LengthMismatch {
                expected: self.rows,
                found: v.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (r, &vr) in v.iter().enumerate() {
            for (o, &m) in out.iter_mut().zip(self.row(r)) {
                *o += vr * m;
            }
        }
        Ok(out)
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max)
    }

    /// Largest elementwise [`relative_error`] between two equally-shaped matrices.
    pub fn max_relative_error(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| relative_error(a, b))
            .fold(0.0, f64::max)
    }

    /// Largest singular value, by power iteration on `MᵀM`.
    pub fn spectral_norm(&self) -> f64 {
        let mtm = self.transpose().matmul(self).expect("shapes agree");
        let n = mtm.rows;
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 0.1).collect();
        let mut lambda = 0.0;
        for _ in 0..500 {
            let w = mtm.mul_vec(&v).expect("square");
            let nw = norm(&w);
            if nw == 0.0 {
                return 0.0;
            }
            let next: Vec<f64> = w.iter().map(|x| x / nw).collect();
            let converged = libm::fabs(nw - lambda) <= 1e-14 * nw;
            lambda = nw;
            v = next;
            if converged {
                break;
            }
        }
        libm::sqrt(lambda)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut l = f.debug_list();
        for r in 0..self.rows {
            l.entry(&self.row(r));
        }
        l.finish()
    }
}

pub(crate) fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    libm::sqrt(dot_slices(v, v))
}

/// `|a − b| / max(|a|, |b|, RELATIVE_ERROR_FLOOR)`
pub fn relative_error(a: f64, b: f64) -> f64 {
    let denom = libm::fabs(a).max(libm::fabs(b)).max(RELATIVE_ERROR_FLOOR);
    libm::fabs(a - b) / denom
}

pub fn dot(a: &DenseVector, b: &DenseVector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(dot_slices(a, b))
}

pub fn outer(a: &DenseVector, b: &DenseVector) -> DenseMatrix {
    let mut data = Vec::with_capacity(a.len() * b.len());
    for &x in a.iter() {
        data.extend(b.iter().map(|&y| x * y));
    }
    DenseMatrix {
        rows: a.len(),
        cols: b.len(),
        data,
    }
}

pub fn l2_normalize(v: &DenseVector) -> Result<DenseVector> {
    let n = v.norm();
    if n == 0.0 {
        return Err(Error::DegenerateDirection);
    }
    DenseVector::new(v.iter().map(|x| x / n).collect())
}

/// Central-difference Jacobian of `f` at `x`; column `i` holds
/// `(f(x + eps·e_i) − f(x − eps·e_i)) / (2·eps)`.
pub fn fd_jacobian<F>(f: F, x: &DenseVector, eps: f64) -> Result<DenseMatrix>
where
    F: Fn(&DenseVector) -> Result<DenseVector>,
{
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(alloc::format!(
            "finite-difference step must be positive, got {eps}"
        )));
    }
    let rows = f(x)?.len();
    let mut jac = DenseMatrix::zeros(rows, x.len());
    let mut probe = x.as_slice().to_vec();
    for i in 0..x.len() {
        let xi = probe[i];
        probe[i] = xi + eps;
        let plus = f(&DenseVector::new(probe.clone())?)?;
        probe[i] = xi - eps;
        let minus = f(&DenseVector::new(probe.clone())?)?;
        probe[i] = xi;
        if plus.len() != rows || minus.len() != rows {
            return Err(Error::LengthMismatch {
                expected: rows,
                found: plus.len().max(minus.len()),
            });
        }
        for r in 0..rows {
            let d = (plus[r] - minus[r]) / (2.0 * eps);
            if !d.is_finite() {
                return Err(Error::NonFinite);
            }
            jac[(r, i)] = d;
        }
    }
    Ok(jac)
}

/// Central-difference gradient of a scalar function.
pub fn fd_gradient<F>(mut f: F, x: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut probe = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    for i in 0..x.len() {
        let xi = probe[i];
        probe[i] = xi + eps;
        let plus = f(&probe)?;
        probe[i] = xi - eps;
        let minus = f(&probe)?;
        probe[i] = xi;
        let d = (plus - minus) / (2.0 * eps);
        if !d.is_finite() {
            return Err(Error::NonFinite);
        }
        grad[i] = d;
    }
    Ok(grad)
}

/// Five-point central-difference gradient, `O(eps⁴)` truncation error.
///
/// Preferred over [`fd_gradient`] near points of high curvature, where the
/// three-point stencil's `O(eps²)` error dominates the comparison.
pub fn fd_gradient5<F>(mut f: F, x: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(alloc::format!("fd step must be positive, got {eps}")));
    }
    let mut probe = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    for i in 0..x.len() {
        let xi = probe[i];
        let mut at = |k: f64| {
            probe[i] = xi + k * eps;
            f(&probe)
        };
        let (p2, p1, m1, m2) = (at(2.0)?, at(1.0)?, at(-1.0)?, at(-2.0)?);
        probe[i] = xi;
        let d = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * eps);
        if !d.is_finite() {
            return Err(Error::NonFinite);
        }
        grad[i] = d;
    }
    Ok(grad)
}

/// Deterministic ChaCha8 stream; equal seeds give bitwise-equal sequences
/// on every platform.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent sub-stream `stream` of `seed`.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn normal_vec(&mut self, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.normal()).collect()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
