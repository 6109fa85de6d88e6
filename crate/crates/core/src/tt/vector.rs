use super::train::{Core, Train};
use super::{TruncationPolicy, DEFAULT_DENSE_CAP};
use crate::Result;

/// A vector in tensor-train format.
#[derive(Debug, Clone, PartialEq)]
pub struct TtVector {
    train: Train,
}

impl TtVector {
    pub fn from_cores(cores: Vec<Core>) -> Result<Self> {
        Ok(TtVector {
            train: Train::from_cores(cores)?,
        })
    }

    pub(crate) fn from_train(train: Train) -> Self {
        TtVector { train }
    }

    /// TT-SVD of a dense vector reshaped to `dims`.
    pub fn from_dense(data: &[f64], dims: &[usize], policy: TruncationPolicy) -> Result<Self> {
        Ok(TtVector {
            train: Train::from_dense(data, dims, policy)?,
        })
    }

    /// Rank-one zero vector.
    pub fn zeros(dims: &[usize]) -> Self {
        TtVector {
            train: Train::zeros(dims),
        }
    }

    /// Rank-one all-ones vector.
    pub fn ones(dims: &[usize]) -> Self {
        TtVector {
            train: Train::zeros(dims).map_cores(|c| {
                Core::from_parts(1, c.mode(), 1, vec![1.0; c.mode()])
            }),
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        self.train.modes()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.train.ranks()
    }

    pub fn max_rank(&self) -> usize {
        self.train.max_rank()
    }

    pub fn cores(&self) -> &[Core] {
        self.train.cores()
    }

    /// Number of stored floating-point values.
    pub fn storage(&self) -> usize {
        self.train.storage()
    }

    pub fn len(&self) -> usize {
        self.train.dense_len().unwrap_or(usize::MAX)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn round(&self, policy: TruncationPolicy) -> Result<Self> {
        Ok(TtVector {
            train: self.train.round(policy)?,
        })
    }

    pub fn add(&self, other: &TtVector) -> Result<Self> {
        Ok(TtVector {
            train: self.train.add(&other.train)?,
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        TtVector {
            train: self.train.scale(s),
        }
    }

    pub fn dot(&self, other: &TtVector) -> Result<f64> {
        self.train.dot(&other.train)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.train.norm()
    }

    /// Dense reconstruction, refusing more than [`DEFAULT_DENSE_CAP`] entries.
    pub fn full(&self) -> Result<Vec<f64>> {
        self.full_capped(DEFAULT_DENSE_CAP)
    }

    pub fn full_capped(&self, cap: usize) -> Result<Vec<f64>> {
        self.train.to_dense(cap, "dense TT vector")
    }

    /// Single entry at a flat (row-major) index.
    pub fn entry(&self, index: usize) -> f64 {
        let dims = self.dims();
        let mut idx = vec![0; dims.len()];
        let mut rem = index;
        for k in (0..dims.len()).rev() {
            idx[k] = rem % dims[k];
            rem /= dims[k];
        }
        let mut acc = vec![1.0];
        for (c, &i) in self.cores().iter().zip(&idx) {
            let mut next = vec![0.0; c.right()];
            for (a, &w) in acc.iter().enumerate() {
                for (b, slot) in next.iter_mut().enumerate() {
                    *slot += w * c.at(a, i, b);
                }
            }
            acc = next;
        }
        acc[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    fn lcg(seed: u64, n: usize) -> Vec<f64> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
        num / den
    }

    #[test]
    fn ones_is_rank_one() {
        let tt = TtVector::from_dense(&[1.0; 8], &[2, 2, 2], TruncationPolicy::Exact).unwrap();
        assert_eq!(tt.ranks(), vec![1, 1, 1, 1]);
        assert!(tt.full().unwrap().iter().all(|&x| (x - 1.0).abs() < 1e-14));
    }

    #[test]
    fn basis_vector_is_rank_one() {
        let tt = TtVector::from_dense(&[1.0, 0.0, 0.0, 0.0], &[2, 2], TruncationPolicy::Exact).unwrap();
        assert_eq!(tt.ranks(), vec![1, 1, 1]);
        assert_eq!(tt.full().unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn random_vector_within_epsilon() {
        let x = lcg(3, 64);
        let tt = TtVector::from_dense(&x, &[2; 6], TruncationPolicy::RelativeError(0.1)).unwrap();
        assert!(rel_err(&tt.full().unwrap(), &x) <= 0.1);
    }

    #[test]
    fn dims_errors() {
        assert!(matches!(
            TtVector::from_dense(&[1.0; 7], &[2, 2, 2], TruncationPolicy::Exact),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            TtVector::from_dense(&[1.0], &[], TruncationPolicy::Exact),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn full_respects_cap() {
        let tt = TtVector::ones(&[2; 5]);
        assert!(matches!(tt.full_capped(16), Err(Error::ResourceLimit { requested: 32, cap: 16, .. })));
        assert_eq!(TtVector::ones(&[2, 2, 2]).full().unwrap(), vec![1.0; 8]);
    }

    #[test]
    fn round_trip_exact() {
        let x = lcg(9, 2 * 3 * 5 * 2);
        let tt = TtVector::from_dense(&x, &[2, 3, 5, 2], TruncationPolicy::Exact).unwrap();
        assert!(rel_err(&tt.full().unwrap(), &x) < 1e-12);
    }

    #[test]
    fn rank_one_rounding_is_identity() {
        let a = TtVector::from_dense(&[1.0, 2.0, 2.0, 4.0], &[2, 2], TruncationPolicy::Exact).unwrap();
        let r = a.round(TruncationPolicy::RelativeError(0.3)).unwrap();
        assert_eq!(r.ranks(), a.ranks());
        assert!(rel_err(&r.full().unwrap(), &a.full().unwrap()) < 1e-14);
    }

    #[test]
    fn self_sum_rounds_back() {
        let x = lcg(5, 32);
        let a = TtVector::from_dense(&x, &[2; 5], TruncationPolicy::RelativeError(0.3)).unwrap();
        let sum = a.add(&a).unwrap();
        assert_eq!(sum.max_rank(), 2 * a.max_rank());
        let r = sum.round(TruncationPolicy::RelativeError(1e-14)).unwrap();
        assert_eq!(r.ranks(), a.ranks());
        let twice: Vec<f64> = a.full().unwrap().iter().map(|v| 2.0 * v).collect();
        assert!(rel_err(&r.full().unwrap(), &twice) < 1e-12);
    }

    #[test]
    fn max_rank_error_matches_discarded_singular_value() {
        // rank-2 4x4 matrix with singular values 3 and 0.5, viewed as an
        // order-2 train over dims (4, 4)
        let u1 = [0.5, 0.5, 0.5, 0.5];
        let u2 = [0.5, -0.5, 0.5, -0.5];
        let v1 = [0.5, 0.5, -0.5, -0.5];
        let v2 = [0.5, -0.5, -0.5, 0.5];
        let mut x = vec![0.0; 16];
        for i in 0..4 {
            for j in 0..4 {
                x[i * 4 + j] = 3.0 * u1[i] * v1[j] + 0.5 * u2[i] * v2[j];
            }
        }
        let a = TtVector::from_dense(&x, &[4, 4], TruncationPolicy::Exact).unwrap();
        assert_eq!(a.ranks(), vec![1, 2, 1]);
        let r = a.round(TruncationPolicy::MaxRank(1)).unwrap();
        let dense = r.full().unwrap();
        let err = dense.iter().zip(&x).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        assert!((err - 0.5).abs() < 1e-12);
    }

    #[test]
    fn addition_and_scaling() {
        let x = lcg(1, 16);
        let y = lcg(2, 16);
        let a = TtVector::from_dense(&x, &[2; 4], TruncationPolicy::Exact).unwrap();
        let b = TtVector::from_dense(&y, &[2; 4], TruncationPolicy::Exact).unwrap();
        let zero = TtVector::zeros(&[2; 4]);
        assert!(rel_err(&a.add(&zero).unwrap().full().unwrap(), &x) < 1e-14);
        let sum = a.add(&b).unwrap().full().unwrap();
        for i in 0..16 {
            assert!((sum[i] - x[i] - y[i]).abs() < 1e-12);
        }
        assert_eq!(a.scale(1.0), a);
        assert!(a.scale(0.0).full().unwrap().iter().all(|&v| v == 0.0));
        let s = a.scale(-2.5).full().unwrap();
        for i in 0..16 {
            assert!((s[i] + 2.5 * x[i]).abs() < 1e-12);
        }
        assert!(a.add(&TtVector::zeros(&[4, 4])).is_err());
    }

    #[test]
    fn add_ranks_sum() {
        // ranks (1,2,3,1) + (1,1,2,1) -> (1,3,5,1)
        let a = TtVector::from_cores(vec![
            Core::new(1, 2, 2, lcg(1, 4)).unwrap(),
            Core::new(2, 3, 3, lcg(2, 18)).unwrap(),
            Core::new(3, 2, 1, lcg(3, 6)).unwrap(),
        ])
        .unwrap();
        let b = TtVector::from_cores(vec![
            Core::new(1, 2, 1, lcg(4, 2)).unwrap(),
            Core::new(1, 3, 2, lcg(5, 6)).unwrap(),
            Core::new(2, 2, 1, lcg(6, 4)).unwrap(),
        ])
        .unwrap();
        assert_eq!(a.add(&b).unwrap().ranks(), vec![1, 3, 5, 1]);
    }

    #[test]
    fn inner_products() {
        let ones = TtVector::ones(&[2, 2, 2]);
        assert_eq!(ones.dot(&ones).unwrap(), 8.0);
        let x = lcg(7, 32);
        let y = lcg(8, 32);
        let a = TtVector::from_dense(&x, &[2; 5], TruncationPolicy::Exact).unwrap();
        let b = TtVector::from_dense(&y, &[2; 5], TruncationPolicy::Exact).unwrap();
        let dense: f64 = x.iter().zip(&y).map(|(p, q)| p * q).sum();
        assert!((a.dot(&b).unwrap() - dense).abs() < 1e-12);
        assert!((a.dot(&b).unwrap() - b.dot(&a).unwrap()).abs() < 1e-13);
        assert!((a.frobenius_norm().powi(2) - a.dot(&a).unwrap()).abs() < 1e-12);
        assert_eq!(TtVector::zeros(&[2, 2]).frobenius_norm(), 0.0);
    }

    #[test]
    fn entry_lookup() {
        let x = lcg(11, 24);
        let a = TtVector::from_dense(&x, &[2, 3, 4], TruncationPolicy::Exact).unwrap();
        for (i, &v) in x.iter().enumerate() {
            assert!((a.entry(i) - v).abs() < 1e-12);
        }
    }
}
