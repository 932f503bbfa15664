//! File formats, experiment runner and command-line interface for the
//! `spherical-core` library.
//!
//! - [`format`]: nine-significant-digit float formatting and vector files.
//! - [`checkpoint`]: versioned, lossless text checkpoints of trained models.
//! - [`run`]: executes configs (in parallel) into per-run directories.
//! - [`report`]: aggregates run directories into comparison tables.
//! - [`cli`]: the `spherical` binary.

pub mod checkpoint;
pub mod cli;
pub mod format;
pub mod report;
pub mod run;
