//! Thin wrappers over faer for row-major buffers.
//!
//! TT cores are stored row-major as `(left, mode, right)`, so the left and
//! right unfoldings are plain row-major matrices over the same buffer. These
//! helpers take and return row-major data.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};

use crate::{Error, Result};

/// Copies a faer matrix into a row-major buffer.
pub fn to_row_major(m: MatRef<'_, f64>) -> Vec<f64> {
    let (rows, cols) = (m.nrows(), m.ncols());
    let mut out = vec![0.0; rows * cols];
    for j in 0..cols {
        for i in 0..rows {
            out[i * cols + j] = m[(i, j)];
        }
    }
    out
}

/// Copies a faer matrix into a column-major buffer.
fn to_col_major(m: MatRef<'_, f64>) -> Vec<f64> {
    let (rows, cols) = (m.nrows(), m.ncols());
    let mut out = Vec::with_capacity(rows * cols);
    for j in 0..cols {
        out.extend(m.col(j).iter());
    }
    out
}

/// `C = A · B` for row-major `A (m×k)` and `B (k×n)`.
pub fn matmul(a: &[f64], m: usize, k: usize, b: &[f64], n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    if m == 0 || n == 0 {
        return Vec::new();
    }
    if k == 0 {
        return vec![0.0; m * n];
    }
    // A row-major buffer read column-major is its transpose, so
    // Cᵀ = Bᵀ Aᵀ lands in column-major order, i.e. C row-major.
    let at = MatRef::from_column_major_slice(a, k, m);
    let bt = MatRef::from_column_major_slice(b, n, k);
    to_col_major((bt * at).as_ref())
}

/// `Aᵀ B` for row-major `A (k×m)` and `B (k×n)`, row-major result `m×n`.
pub fn matmul_tn(a: &[f64], k: usize, m: usize, b: &[f64], n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    if m == 0 || n == 0 {
        return Vec::new();
    }
    if k == 0 {
        return vec![0.0; m * n];
    }
    // Column-major views give Aᵀ (m×k) and Bᵀ (n×k); Cᵀ = Bᵀ A.
    let at = MatRef::from_column_major_slice(a, m, k);
    let bt = MatRef::from_column_major_slice(b, n, k);
    to_col_major((bt * at.transpose()).as_ref())
}

/// Thin SVD of a row-major `rows × cols` matrix.
pub struct ThinSvd {
    /// Row-major `rows × r`.
    pub u: Vec<f64>,
    /// Descending.
    pub s: Vec<f64>,
    /// Row-major `r × cols`.
    pub vt: Vec<f64>,
}

pub fn svd(a: &[f64], rows: usize, cols: usize) -> Result<ThinSvd> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure(format!(
            "SVD input of size {rows}x{cols} has non-finite entries"
        )));
    }
    let m = MatRef::from_row_major_slice(a, rows, cols);
    let f = m
        .thin_svd()
        .map_err(|e| Error::NumericalFailure(format!("SVD of {rows}x{cols} failed: {e:?}")))?;
    let s = f.S().column_vector().iter().copied().collect();
    Ok(ThinSvd {
        u: to_row_major(f.U()),
        s,
        // Vᵀ row-major is V column-major.
        vt: to_col_major(f.V()),
    })
}

/// LQ factorization of a row-major `rows × cols` matrix: `A = L Q` with `Q`
/// having orthonormal rows. Returns `(L, Q, r)` with `L` row-major `rows × r`
/// and `Q` row-major `r × cols`, `r = min(rows, cols)`.
pub fn lq(a: &[f64], rows: usize, cols: usize) -> (Vec<f64>, Vec<f64>, usize) {
    // The buffer read column-major is Aᵀ (cols × rows); Aᵀ = Q̃ R gives
    // A = Rᵀ Q̃ᵀ.
    let at = MatRef::from_column_major_slice(a, cols, rows);
    let qr = at.qr();
    let q = qr.compute_thin_Q();
    let r_mat = qr.thin_R();
    let r = q.ncols();
    let l = to_col_major(r_mat);
    (l, to_col_major(q.as_ref()), r)
}

/// Solves the symmetric positive-definite system `A X = B` by Cholesky.
pub fn spd_solve(a: MatRef<'_, f64>, b: MatRef<'_, f64>, what: &str) -> Result<Mat<f64>> {
    let chol = a
        .llt(Side::Lower)
        .map_err(|_| Error::NumericalFailure(format!("{what} is not positive definite")))?;
    Ok(chol.solve(b))
}

/// Inverse of a symmetric positive-definite matrix.
pub fn spd_inverse(a: MatRef<'_, f64>, what: &str) -> Result<Mat<f64>> {
    let n = a.nrows();
    spd_solve(a, Mat::<f64>::identity(n, n).as_ref(), what)
}

/// Eigenvalues (descending) and matching eigenvectors as columns.
pub fn sym_eigen_desc(a: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let n = a.nrows();
    let eig = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::NumericalFailure(format!("eigendecomposition failed: {e:?}")))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let values = (0..n).rev().map(|i| s[i]).collect();
    let vecs = Mat::from_fn(n, n, |i, j| u[(i, n - 1 - j)]);
    Ok((values, vecs))
}

/// Eigenvalues only, descending.
pub fn sym_eigenvalues_desc(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    let mut v = a
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::NumericalFailure(format!("eigendecomposition failed: {e:?}")))?;
    v.reverse();
    Ok(v)
}
