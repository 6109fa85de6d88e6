use crate::{Error, Result};

/// Rank control applied whenever a tensor train is built or rounded.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum TruncationPolicy {
    /// Keep every numerically nonzero singular value.
    #[default]
    Exact,
    /// Relative Frobenius error bound `ε` on the whole train.
    RelativeError(f64),
    /// Hard cap on every TT-rank.
    MaxRank(usize),
}

/// Singular values below this fraction of the largest one count as zero.
pub const NUMERICAL_RANK_TOL: f64 = 1e-14;

impl TruncationPolicy {
    /// `ε = 0` means exact, mirroring how truncation tables write "no
    /// truncation".
    pub fn relative(eps: f64) -> Result<Self> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::invalid(format!("relative error must be >= 0, got {eps}")));
        }
        Ok(if eps == 0.0 {
            TruncationPolicy::Exact
        } else {
            TruncationPolicy::RelativeError(eps)
        })
    }

    pub fn max_rank(rank: usize) -> Result<Self> {
        if rank == 0 {
            return Err(Error::invalid("max rank must be >= 1"));
        }
        Ok(TruncationPolicy::MaxRank(rank))
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TruncationPolicy::Exact => Ok(()),
            TruncationPolicy::RelativeError(eps) => Self::relative(eps).map(|_| ()),
            TruncationPolicy::MaxRank(r) => Self::max_rank(r).map(|_| ()),
        }
    }

    /// Per-unfolding threshold `δ = ε‖x‖/√(d−1)`; the squared tail of the
    /// discarded singular values at each of the `d − 1` cuts stays below `δ²`,
    /// which bounds the global relative error by `ε`.
    pub(crate) fn delta(&self, norm: f64, order: usize) -> f64 {
        match *self {
            TruncationPolicy::RelativeError(eps) if order > 1 => {
                eps * norm / ((order - 1) as f64).sqrt()
            }
            _ => 0.0,
        }
    }

    /// Number of singular values to keep. `s` must be sorted descending.
    pub(crate) fn rank_for(&self, s: &[f64], delta: f64) -> usize {
        let smax = s.first().copied().unwrap_or(0.0);
        let numerical = if smax > 0.0 {
            s.iter().take_while(|&&v| v > NUMERICAL_RANK_TOL * smax).count()
        } else {
            0
        };
        let r = match *self {
            TruncationPolicy::Exact => numerical,
            TruncationPolicy::RelativeError(_) => {
                let budget = delta * delta;
                let mut tail = 0.0;
                let mut r = s.len();
                while r > 0 && tail + s[r - 1] * s[r - 1] <= budget {
                    tail += s[r - 1] * s[r - 1];
                    r -= 1;
                }
                r.min(numerical)
            }
            TruncationPolicy::MaxRank(cap) => numerical.min(cap),
        };
        r.max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_epsilon_is_exact() {
        assert_eq!(TruncationPolicy::relative(0.0).unwrap(), TruncationPolicy::Exact);
        assert!(TruncationPolicy::relative(-1.0).is_err());
        assert!(TruncationPolicy::max_rank(0).is_err());
    }

    #[test]
    fn rank_selection() {
        let s = [4.0, 2.0, 1.0, 0.5];
        assert_eq!(TruncationPolicy::Exact.rank_for(&s, 0.0), 4);
        assert_eq!(TruncationPolicy::MaxRank(2).rank_for(&s, 0.0), 2);
        // tail of {1, 0.5} has norm √1.25 ≈ 1.118
        assert_eq!(TruncationPolicy::RelativeError(0.1).rank_for(&s, 1.2), 2);
        assert_eq!(TruncationPolicy::RelativeError(0.1).rank_for(&s, 1.1), 3);
        // floor at one
        assert_eq!(TruncationPolicy::RelativeError(0.1).rank_for(&s, 100.0), 1);
        assert_eq!(TruncationPolicy::Exact.rank_for(&[0.0, 0.0], 0.0), 1);
        assert_eq!(TruncationPolicy::Exact.rank_for(&[1.0, 1e-16], 0.0), 1);
    }
}
