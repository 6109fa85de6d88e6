use super::TruncationPolicy;
use crate::linalg;
use crate::{Error, Result};

/// One TT core: a three-way array `(left rank, mode, right rank)` stored
/// row-major, so `data[(a * mode + i) * right + b]` is entry `(a, i, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Core {
    left: usize,
    mode: usize,
    right: usize,
    data: Vec<f64>,
}

impl Core {
    pub fn new(left: usize, mode: usize, right: usize, data: Vec<f64>) -> Result<Self> {
        if left == 0 || mode == 0 || right == 0 {
            return Err(Error::invalid("core sizes must be positive"));
        }
        if data.len() != left * mode * right {
            return Err(Error::invalid(format!(
                "core ({left}, {mode}, {right}) needs {} entries, got {}",
                left * mode * right,
                data.len()
            )));
        }
        Ok(Core { left, mode, right, data })
    }

    pub(crate) fn from_parts(left: usize, mode: usize, right: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), left * mode * right);
        Core { left, mode, right, data }
    }

    pub fn left(&self) -> usize {
        self.left
    }

    pub fn mode(&self) -> usize {
        self.mode
    }

    pub fn right(&self) -> usize {
        self.right
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn at(&self, a: usize, i: usize, b: usize) -> f64 {
        self.data[(a * self.mode + i) * self.right + b]
    }
}

/// A chain of cores with boundary ranks one. Vectors use it directly;
/// matrices use it with fused `(row, col)` modes.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Train {
    cores: Vec<Core>,
}

impl Train {
    pub fn from_cores(cores: Vec<Core>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::invalid("a tensor train needs at least one core"));
        }
        if cores[0].left != 1 || cores[cores.len() - 1].right != 1 {
            return Err(Error::invalid("boundary ranks must be 1"));
        }
        for (k, pair) in cores.windows(2).enumerate() {
            if pair[0].right != pair[1].left {
                return Err(Error::invalid(format!(
                    "rank mismatch between cores {k} and {}: {} vs {}",
                    k + 1,
                    pair[0].right,
                    pair[1].left
                )));
            }
        }
        Ok(Train { cores })
    }

    pub fn zeros(modes: &[usize]) -> Self {
        Train {
            cores: modes
                .iter()
                .map(|&n| Core::from_parts(1, n, 1, vec![0.0; n]))
                .collect(),
        }
    }

    pub fn cores(&self) -> &[Core] {
        &self.cores
    }

    pub fn modes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.mode).collect()
    }

    pub fn ranks(&self) -> Vec<usize> {
        let mut r = Vec::with_capacity(self.cores.len() + 1);
        r.push(1);
        r.extend(self.cores.iter().map(|c| c.right));
        r
    }

    pub fn max_rank(&self) -> usize {
        self.cores.iter().map(|c| c.right).max().unwrap_or(1)
    }

    pub fn storage(&self) -> usize {
        self.cores.iter().map(|c| c.data.len()).sum()
    }

    /// Product of the modes, or `None` on overflow.
    pub fn dense_len(&self) -> Option<usize> {
        self.cores.iter().try_fold(1usize, |acc, c| acc.checked_mul(c.mode))
    }

    pub fn to_dense(&self, cap: usize, what: &'static str) -> Result<Vec<f64>> {
        let len = self.dense_len().unwrap_or(usize::MAX);
        if len > cap {
            return Err(Error::ResourceLimit { what, requested: len, cap });
        }
        let mut acc = vec![1.0];
        let mut prefix = 1;
        for c in &self.cores {
            acc = linalg::matmul(&acc, prefix, c.left, &c.data, c.mode * c.right);
            prefix *= c.mode;
        }
        Ok(acc)
    }

    /// TT-SVD: sequential truncated SVDs of the left unfoldings.
    pub fn from_dense(data: &[f64], modes: &[usize], policy: TruncationPolicy) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::invalid("dims must be nonempty"));
        }
        if modes.contains(&0) {
            return Err(Error::invalid("dims must be positive"));
        }
        let len = modes.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
        if len != Some(data.len()) {
            return Err(Error::invalid(format!(
                "data of length {} does not match dims {modes:?}",
                data.len()
            )));
        }
        policy.validate()?;
        let d = modes.len();
        let norm = data.iter().map(|x| x * x).sum::<f64>().sqrt();
        let delta = policy.delta(norm, d);
        let mut cores = Vec::with_capacity(d);
        let mut rem = data.to_vec();
        let mut r_prev = 1;
        for &n in &modes[..d - 1] {
            let rows = r_prev * n;
            let cols = rem.len() / rows;
            let f = linalg::svd(&rem, rows, cols)?;
            let full = f.s.len();
            let r = policy.rank_for(&f.s, delta);
            cores.push(Core::from_parts(r_prev, n, r, take_columns(&f.u, rows, full, r)));
            let mut next = f.vt[..r * cols].to_vec();
            for (row, &sv) in next.chunks_mut(cols).zip(&f.s) {
                row.iter_mut().for_each(|x| *x *= sv);
            }
            rem = next;
            r_prev = r;
        }
        cores.push(Core::from_parts(r_prev, modes[d - 1], 1, rem));
        Ok(Train { cores })
    }

    /// TT-rounding: right-to-left orthogonalization, then a left-to-right
    /// truncation sweep.
    pub fn round(&self, policy: TruncationPolicy) -> Result<Self> {
        policy.validate()?;
        let d = self.cores.len();
        if d == 1 {
            return Ok(self.clone());
        }
        let mut cores = self.cores.clone();
        for k in (1..d).rev() {
            let (left, mode, right) = (cores[k].left, cores[k].mode, cores[k].right);
            let (l, q, r) = linalg::lq(&cores[k].data, left, mode * right);
            cores[k] = Core::from_parts(r, mode, right, q);
            let prev = &cores[k - 1];
            let merged = linalg::matmul(&prev.data, prev.left * prev.mode, left, &l, r);
            cores[k - 1] = Core::from_parts(prev.left, prev.mode, r, merged);
        }
        let norm = cores[0].data.iter().map(|x| x * x).sum::<f64>().sqrt();
        let delta = policy.delta(norm, d);
        for k in 0..d - 1 {
            let (left, mode, right) = (cores[k].left, cores[k].mode, cores[k].right);
            let rows = left * mode;
            let f = linalg::svd(&cores[k].data, rows, right)?;
            let full = f.s.len();
            let r = policy.rank_for(&f.s, delta);
            cores[k] = Core::from_parts(left, mode, r, take_columns(&f.u, rows, full, r));
            let mut sv = f.vt[..r * right].to_vec();
            for (row, &s) in sv.chunks_mut(right).zip(&f.s) {
                row.iter_mut().for_each(|x| *x *= s);
            }
            let next = &cores[k + 1];
            let merged = linalg::matmul(&sv, r, right, &next.data, next.mode * next.right);
            cores[k + 1] = Core::from_parts(r, next.mode, next.right, merged);
        }
        Ok(Train { cores })
    }

    pub fn add(&self, other: &Train) -> Result<Self> {
        if self.modes() != other.modes() {
            return Err(Error::invalid(format!(
                "dims mismatch in addition: {:?} vs {:?}",
                self.modes(),
                other.modes()
            )));
        }
        let d = self.cores.len();
        if d == 1 {
            let data = self.cores[0]
                .data
                .iter()
                .zip(&other.cores[0].data)
                .map(|(a, b)| a + b)
                .collect();
            return Ok(Train {
                cores: vec![Core::from_parts(1, self.cores[0].mode, 1, data)],
            });
        }
        let mut cores = Vec::with_capacity(d);
        for (k, (a, b)) in self.cores.iter().zip(&other.cores).enumerate() {
            let n = a.mode;
            let left = if k == 0 { 1 } else { a.left + b.left };
            let right = if k == d - 1 { 1 } else { a.right + b.right };
            let mut data = vec![0.0; left * n * right];
            // A occupies the top-left block, B the bottom-right; the first
            // core concatenates along the right rank, the last along the left.
            let (b_row, b_col) = (if k == 0 { 0 } else { a.left }, if k == d - 1 { 0 } else { a.right });
            for al in 0..a.left {
                for i in 0..n {
                    for ar in 0..a.right {
                        data[(al * n + i) * right + ar] = a.at(al, i, ar);
                    }
                }
            }
            for bl in 0..b.left {
                for i in 0..n {
                    for br in 0..b.right {
                        data[((b_row + bl) * n + i) * right + b_col + br] = b.at(bl, i, br);
                    }
                }
            }
            cores.push(Core::from_parts(left, n, right, data));
        }
        Ok(Train { cores })
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.cores[0].data.iter_mut().for_each(|x| *x *= s);
        out
    }

    /// Full contraction `⟨self, other⟩` without densifying.
    pub fn dot(&self, other: &Train) -> Result<f64> {
        if self.modes() != other.modes() {
            return Err(Error::invalid(format!(
                "dims mismatch in inner product: {:?} vs {:?}",
                self.modes(),
                other.modes()
            )));
        }
        // w is (rank of self) × (rank of other), row-major.
        let mut w = vec![1.0];
        for (a, b) in self.cores.iter().zip(&other.cores) {
            // t = wᵀ · A : (b.left) × (n · a.right)
            let t = linalg::matmul_tn(&w, a.left, b.left, &a.data, a.mode * a.right);
            // w' = tᵀ · B over the fused (b.left, n) index : a.right × b.right
            w = linalg::matmul_tn(&t, b.left * a.mode, a.right, &b.data, b.right);
        }
        Ok(w[0])
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).expect("same dims").max(0.0).sqrt()
    }

    pub fn map_cores(&self, f: impl Fn(&Core) -> Core) -> Self {
        Train {
            cores: self.cores.iter().map(f).collect(),
        }
    }
}

fn take_columns(u: &[f64], rows: usize, cols: usize, keep: usize) -> Vec<f64> {
    if keep == cols {
        return u.to_vec();
    }
    let mut out = Vec::with_capacity(rows * keep);
    for row in u.chunks(cols) {
        out.extend_from_slice(&row[..keep]);
    }
    out
}
