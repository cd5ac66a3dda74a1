//! Direction-of-arrival estimation under complex elliptically symmetric
//! (CES) array snapshots.
//!
//! The crate provides the CES snapshot model, ULA geometry, the stochastic
//! and semiparametric stochastic Cramér–Rao bounds, five scatter-matrix
//! estimators for MUSIC, the IAA-APES spectral estimator, and a seeded Monte
//! Carlo harness that compares the estimators' MSE with the bounds.

// Parameter guards are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array;
pub mod bounds;
pub mod ces;
pub mod cli;
pub mod config;
pub mod doa;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod quadrature;
pub mod scatter;

pub use error::{Error, Result};
