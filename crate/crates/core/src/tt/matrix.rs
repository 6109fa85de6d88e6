use super::train::{Core, Train};
use super::{TruncationPolicy, TtVector, DEFAULT_DENSE_CAP};
use crate::{Error, Result};

/// A matrix in tensor-train format.
///
/// Core `k` is a four-way array `(r_{k-1}, m_k, n_k, r_k)`; internally the
/// `(m_k, n_k)` pair is fused into one mode of size `m_k n_k` with the row
/// index major, so rounding, addition and norms reuse the vector code.
#[derive(Debug, Clone, PartialEq)]
pub struct TtMatrix {
    row_dims: Vec<usize>,
    col_dims: Vec<usize>,
    train: Train,
}

impl TtMatrix {
    /// Builds a TT-matrix from four-way cores given as fused three-way cores
    /// with mode `row_dims[k] * col_dims[k]`.
    pub fn from_cores(row_dims: Vec<usize>, col_dims: Vec<usize>, cores: Vec<Core>) -> Result<Self> {
        if row_dims.len() != col_dims.len() || row_dims.len() != cores.len() {
            return Err(Error::invalid("row dims, col dims and cores must have equal length"));
        }
        for (k, c) in cores.iter().enumerate() {
            if c.mode() != row_dims[k] * col_dims[k] {
                return Err(Error::invalid(format!(
                    "core {k} has mode {} but dims give {}x{}",
                    c.mode(),
                    row_dims[k],
                    col_dims[k]
                )));
            }
        }
        Ok(TtMatrix {
            row_dims,
            col_dims,
            train: Train::from_cores(cores)?,
        })
    }

    fn with_train(row_dims: Vec<usize>, col_dims: Vec<usize>, train: Train) -> Self {
        TtMatrix { row_dims, col_dims, train }
    }

    /// TT-SVD of a dense row-major matrix of shape `(Π row_dims, Π col_dims)`
    /// under the interleaved `(i_k, j_k)` tensorization.
    pub fn from_dense(
        data: &[f64],
        row_dims: &[usize],
        col_dims: &[usize],
        policy: TruncationPolicy,
    ) -> Result<Self> {
        if row_dims.len() != col_dims.len() {
            return Err(Error::invalid("row_dims and col_dims must have equal length"));
        }
        if row_dims.is_empty() {
            return Err(Error::invalid("dims must be nonempty"));
        }
        let rows: usize = row_dims.iter().product();
        let cols: usize = col_dims.iter().product();
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix with {} entries does not match shape {rows}x{cols}",
                data.len()
            )));
        }
        let modes: Vec<usize> = row_dims.iter().zip(col_dims).map(|(m, n)| m * n).collect();
        let mut tensor = vec![0.0; data.len()];
        for_each_pair(row_dims, col_dims, |r, c, t| tensor[t] = data[r * cols + c]);
        Ok(TtMatrix {
            row_dims: row_dims.to_vec(),
            col_dims: col_dims.to_vec(),
            train: Train::from_dense(&tensor, &modes, policy)?,
        })
    }

    /// `value · I` with every rank equal to one.
    pub fn scaled_identity(value: f64, dims: &[usize]) -> Self {
        let cores = dims
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                let mut data = vec![0.0; n * n];
                let diag = if k == 0 { value } else { 1.0 };
                for i in 0..n {
                    data[i * n + i] = diag;
                }
                Core::from_parts(1, n * n, 1, data)
            })
            .collect();
        TtMatrix {
            row_dims: dims.to_vec(),
            col_dims: dims.to_vec(),
            train: Train::from_cores(cores).expect("rank-one cores"),
        }
    }

    pub fn identity(dims: &[usize]) -> Self {
        Self::scaled_identity(1.0, dims)
    }

    pub fn zeros(row_dims: &[usize], col_dims: &[usize]) -> Self {
        let modes: Vec<usize> = row_dims.iter().zip(col_dims).map(|(m, n)| m * n).collect();
        TtMatrix {
            row_dims: row_dims.to_vec(),
            col_dims: col_dims.to_vec(),
            train: Train::zeros(&modes),
        }
    }

    /// `u vᵀ`, with row dims from `u` and column dims from `v`.
    pub fn outer(u: &TtVector, v: &TtVector) -> Result<Self> {
        let (uc, vc) = (u.cores(), v.cores());
        if uc.len() != vc.len() {
            return Err(Error::invalid("outer product needs trains of equal order"));
        }
        let cores = uc
            .iter()
            .zip(vc)
            .map(|(a, b)| {
                let (m, n) = (a.mode(), b.mode());
                let (left, right) = (a.left() * b.left(), a.right() * b.right());
                let mut data = vec![0.0; left * m * n * right];
                for al in 0..a.left() {
                    for bl in 0..b.left() {
                        for i in 0..m {
                            for j in 0..n {
                                for ar in 0..a.right() {
                                    let x = a.at(al, i, ar);
                                    let base = (((al * b.left() + bl) * m + i) * n + j) * right + ar * b.right();
                                    for br in 0..b.right() {
                                        data[base + br] = x * b.at(bl, j, br);
                                    }
                                }
                            }
                        }
                    }
                }
                Core::from_parts(left, m * n, right, data)
            })
            .collect();
        Ok(TtMatrix {
            row_dims: u.dims(),
            col_dims: v.dims(),
            train: Train::from_cores(cores)?,
        })
    }

    pub fn row_dims(&self) -> &[usize] {
        &self.row_dims
    }

    pub fn col_dims(&self) -> &[usize] {
        &self.col_dims
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.train.ranks()
    }

    pub fn max_rank(&self) -> usize {
        self.train.max_rank()
    }

    /// Fused three-way cores, mode `m_k n_k` with the row index major.
    pub fn cores(&self) -> &[Core] {
        self.train.cores()
    }

    pub fn storage(&self) -> usize {
        self.train.storage()
    }

    pub fn round(&self, policy: TruncationPolicy) -> Result<Self> {
        Ok(Self::with_train(
            self.row_dims.clone(),
            self.col_dims.clone(),
            self.train.round(policy)?,
        ))
    }

    pub fn add(&self, other: &TtMatrix) -> Result<Self> {
        if self.row_dims != other.row_dims || self.col_dims != other.col_dims {
            return Err(Error::invalid("dims mismatch in matrix addition"));
        }
        Ok(Self::with_train(
            self.row_dims.clone(),
            self.col_dims.clone(),
            self.train.add(&other.train)?,
        ))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::with_train(self.row_dims.clone(), self.col_dims.clone(), self.train.scale(s))
    }

    /// Frobenius inner product `Σ_ij A_ij B_ij`.
    pub fn dot(&self, other: &TtMatrix) -> Result<f64> {
        if self.row_dims != other.row_dims || self.col_dims != other.col_dims {
            return Err(Error::invalid("dims mismatch in matrix inner product"));
        }
        self.train.dot(&other.train)
    }

    /// Frobenius norm by self-contraction.
    pub fn frobenius_norm(&self) -> f64 {
        self.train.norm()
    }

    pub fn transpose(&self) -> Self {
        let cores = self
            .cores()
            .iter()
            .enumerate()
            .map(|(k, c)| transpose_core(c, self.row_dims[k], self.col_dims[k]))
            .collect();
        Self::with_train(
            self.col_dims.clone(),
            self.row_dims.clone(),
            Train::from_cores(cores).expect("transpose keeps ranks"),
        )
    }

    /// `M v`. Interior ranks of the result are products of the operand ranks.
    pub fn matvec(&self, v: &TtVector) -> Result<TtVector> {
        if self.col_dims != v.dims() {
            return Err(Error::invalid(format!(
                "matvec dims mismatch: matrix columns {:?}, vector {:?}",
                self.col_dims,
                v.dims()
            )));
        }
        let cores = self
            .cores()
            .iter()
            .zip(v.cores())
            .enumerate()
            .map(|(k, (a, x))| {
                let (m, n) = (self.row_dims[k], self.col_dims[k]);
                let (left, right) = (a.left() * x.left(), a.right() * x.right());
                let mut data = vec![0.0; left * m * right];
                let ad = a.data();
                for al in 0..a.left() {
                    for i in 0..m {
                        for j in 0..n {
                            for ar in 0..a.right() {
                                let w = ad[((al * m + i) * n + j) * a.right() + ar];
                                if w == 0.0 {
                                    continue;
                                }
                                for xl in 0..x.left() {
                                    let base = ((al * x.left() + xl) * m + i) * right + ar * x.right();
                                    for xr in 0..x.right() {
                                        data[base + xr] += w * x.at(xl, j, xr);
                                    }
                                }
                            }
                        }
                    }
                }
                Core::from_parts(left, m, right, data)
            })
            .collect();
        Ok(TtVector::from_train(Train::from_cores(cores)?))
    }

    /// `A B`. Interior ranks of the result are products of the operand ranks.
    pub fn matmul(&self, other: &TtMatrix) -> Result<TtMatrix> {
        if self.col_dims != other.row_dims {
            return Err(Error::invalid(format!(
                "matmul dims mismatch: {:?} vs {:?}",
                self.col_dims, other.row_dims
            )));
        }
        let cores = self
            .cores()
            .iter()
            .zip(other.cores())
            .enumerate()
            .map(|(k, (a, b))| {
                let (m, n, p) = (self.row_dims[k], self.col_dims[k], other.col_dims[k]);
                let (left, right) = (a.left() * b.left(), a.right() * b.right());
                let mut data = vec![0.0; left * m * p * right];
                let (ad, bd) = (a.data(), b.data());
                for al in 0..a.left() {
                    for i in 0..m {
                        for j in 0..n {
                            for ar in 0..a.right() {
                                let w = ad[((al * m + i) * n + j) * a.right() + ar];
                                if w == 0.0 {
                                    continue;
                                }
                                for bl in 0..b.left() {
                                    for l in 0..p {
                                        let out = (((al * b.left() + bl) * m + i) * p + l) * right + ar * b.right();
                                        let src = ((bl * n + j) * p + l) * b.right();
                                        for br in 0..b.right() {
                                            data[out + br] += w * bd[src + br];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                Core::from_parts(left, m * p, right, data)
            })
            .collect();
        Ok(TtMatrix {
            row_dims: self.row_dims.clone(),
            col_dims: other.col_dims.clone(),
            train: Train::from_cores(cores)?,
        })
    }

    /// Dense row-major reconstruction, refusing more than
    /// [`DEFAULT_DENSE_CAP`] entries.
    pub fn full(&self) -> Result<Vec<f64>> {
        self.full_capped(DEFAULT_DENSE_CAP)
    }

    pub fn full_capped(&self, cap: usize) -> Result<Vec<f64>> {
        let tensor = self.train.to_dense(cap, "dense TT matrix")?;
        let cols: usize = self.col_dims.iter().product();
        let mut out = vec![0.0; tensor.len()];
        for_each_pair(&self.row_dims, &self.col_dims, |r, c, t| out[r * cols + c] = tensor[t]);
        Ok(out)
    }
}

fn transpose_core(c: &Core, m: usize, n: usize) -> Core {
    let (left, right) = (c.left(), c.right());
    let mut data = vec![0.0; c.data().len()];
    for a in 0..left {
        for i in 0..m {
            for j in 0..n {
                for b in 0..right {
                    data[((a * n + j) * m + i) * right + b] = c.data()[((a * m + i) * n + j) * right + b];
                }
            }
        }
    }
    Core::from_parts(left, m * n, right, data)
}

/// Visits every (row, col) of the matrix together with the flat index of the
/// interleaved tensor `(i_1 j_1, i_2 j_2, …)`.
fn for_each_pair(row_dims: &[usize], col_dims: &[usize], mut f: impl FnMut(usize, usize, usize)) {
    let d = row_dims.len();
    let rows: usize = row_dims.iter().product();
    let cols: usize = col_dims.iter().product();
    let mut ri = vec![0; d];
    let mut ci = vec![0; d];
    for r in 0..rows {
        let mut rem = r;
        for k in (0..d).rev() {
            ri[k] = rem % row_dims[k];
            rem /= row_dims[k];
        }
        for c in 0..cols {
            let mut rem = c;
            for k in (0..d).rev() {
                ci[k] = rem % col_dims[k];
                rem /= col_dims[k];
            }
            let mut t = 0;
            for k in 0..d {
                t = t * (row_dims[k] * col_dims[k]) + ri[k] * col_dims[k] + ci[k];
            }
            f(r, c, t);
        }
    }
}
