//! Least-squares SVM training on large datasets with a tensor-network
//! Kalman filter.
//!
//! The dual system `(Ω + I/γ) α = y` is solved row by row with a recursive
//! Bayesian filter. Mean, covariance, gain and every kernel row live in
//! tensor-train (TT) form, so neither the kernel matrix nor the covariance
//! is ever stored densely. Predictions come with `±3σ` confidence bounds.
//!
//! Module map:
//! - [`tt`]: TT vectors/matrices, TT-SVD, rounding and arithmetic.
//! - [`kernels`]: kernel functions, dual-matrix rows, tensorization.
//! - [`dual`]: the dual problem and its dense oracles.
//! - [`filter`]: the tensor-network Kalman filter.
//! - [`predict`]: predictions, variances and metrics.
//! - [`baselines`]: Nyström solver and kernel spectra.
//! - [`data`]: synthetic generators, CSV ingestion, centering.
//! - [`persist`]: the binary model file.

pub mod baselines;
pub mod data;
pub mod dual;
mod error;
pub mod filter;
pub mod kernels;
pub(crate) mod linalg;
pub mod persist;
pub mod predict;
pub mod tt;

pub use error::{Error, Result};
/// Re-exported so callers can name the dense matrices the oracles return.
pub use faer;
