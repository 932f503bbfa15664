//! Regression on n-spheres.
//!
//! This crate holds the allocation-only (`no_std` + `alloc`) part of the
//! project:
//!
//! - [`numeric`]: dense vectors/matrices, a seeded counter-based RNG and a
//!   central-difference Jacobian used to check every analytic derivative.
//! - [`activations`]: softmax, plain ℓ₂ normalization (`S_flat`) and the
//!   spherical exponential (`S_exp`), each with an analytic Jacobian.
//! - [`rotations`]: Euler angles, rotation matrices, quaternions, axis-angle,
//!   the geodesic metric and Haar-uniform sampling on SO(3).
//! - [`heads`]: absolute-value + sign-class target decomposition and the
//!   regression/classification losses with their gradients.
//! - [`network`]: a small two-branch MLP trained with hand-written
//!   backpropagation and plain SGD.
//! - [`data`], [`metrics`], [`experiment`]: synthetic S¹/S²/S³ tasks,
//!   evaluation metrics and the end-to-end experiment driver.
//!
//! Jacobians everywhere use the convention `J[j][i] = ∂p_j/∂o_i` (row = output).
//!
//! File formats, the CLI and anything touching the filesystem live in the
//! companion `spherical` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod activations;
pub mod data;
mod error;
pub mod experiment;
pub mod gradcheck;
pub mod heads;
pub mod metrics;
pub mod network;
pub mod numeric;
pub mod rotations;

pub use error::{Error, Result};
pub use numeric::{DenseMatrix, DenseVector, Rng};
