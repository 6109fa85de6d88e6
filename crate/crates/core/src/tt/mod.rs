//! Tensor-train vectors and matrices.
//!
//! A vector of length `n_1 ⋯ n_d` is indexed row-major by `(i_1, …, i_d)`,
//! so the first core carries the slowest-varying index. A matrix pairs
//! row index `i_k` with column index `j_k` inside core `k`.

mod matrix;
mod policy;
mod train;
mod vector;

pub use matrix::TtMatrix;
pub use policy::{TruncationPolicy, NUMERICAL_RANK_TOL};
pub use train::Core;
pub use vector::TtVector;

/// Default cap on the number of entries [`TtVector::full`] and
/// [`TtMatrix::full`] will materialize.
pub const DEFAULT_DENSE_CAP: usize = 1 << 20;
