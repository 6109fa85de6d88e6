//! Kernel functions, rows of the dual matrix and the tensorization of `N`.

use crate::data::Inputs;
use crate::tt::{TruncationPolicy, TtVector};
use crate::{Error, Result};

/// A positive-semidefinite kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `exp(−‖x − x′‖² / σ²)`.
    Rbf { sigma2: f64 },
    /// `xᵀx′`.
    Linear,
    /// `(xᵀx′ + offset)^degree`.
    Polynomial { degree: u32, offset: f64 },
}

impl KernelSpec {
    pub fn rbf(sigma2: f64) -> Result<Self> {
        let k = KernelSpec::Rbf { sigma2 };
        k.validate()?;
        Ok(k)
    }

    pub fn polynomial(degree: u32, offset: f64) -> Result<Self> {
        let k = KernelSpec::Polynomial { degree, offset };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { sigma2 } if !(sigma2 > 0.0 && sigma2.is_finite()) => {
                Err(Error::invalid(format!("RBF sigma2 must be positive, got {sigma2}")))
            }
            KernelSpec::Polynomial { degree: 0, .. } => {
                Err(Error::invalid("polynomial degree must be >= 1"))
            }
            KernelSpec::Polynomial { offset, .. } if !offset.is_finite() => {
                Err(Error::invalid("polynomial offset must be finite"))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        if x.len() != x2.len() {
            return Err(Error::invalid(format!(
                "feature vectors differ in length: {} vs {}",
                x.len(),
                x2.len()
            )));
        }
        Ok(self.eval_unchecked(x, x2))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], x2: &[f64]) -> f64 {
        match *self {
            KernelSpec::Rbf { sigma2 } => {
                let d2: f64 = x.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / sigma2).exp()
            }
            KernelSpec::Linear => dot(x, x2),
            KernelSpec::Polynomial { degree, offset } => {
                (dot(x, x2) + offset).powi(degree as i32)
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Row `k` (zero-based) of `Ω + I/γ`.
pub fn kernel_row(spec: &KernelSpec, x: &Inputs, k: usize, gamma: f64) -> Result<Vec<f64>> {
    if k >= x.len() {
        return Err(Error::invalid(format!("row {k} out of range for {} points", x.len())));
    }
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
    }
    let xk = x.row(k);
    let mut row: Vec<f64> = x.rows().map(|xj| spec.eval_unchecked(xk, xj)).collect();
    row[k] += 1.0 / gamma;
    Ok(row)
}

/// `K(x_star, x_j)` for every training point; no diagonal shift.
pub fn test_row(spec: &KernelSpec, x: &Inputs, x_star: &[f64]) -> Result<Vec<f64>> {
    if x_star.len() != x.features() {
        return Err(Error::invalid(format!(
            "test point has {} features, model expects {}",
            x_star.len(),
            x.features()
        )));
    }
    Ok(x.rows().map(|xj| spec.eval_unchecked(x_star, xj)).collect())
}

/// Prime factors of `n` in ascending order. `n = 1` maps to a single
/// mode of size one.
pub fn tensorize_dims(n: usize) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::invalid("cannot tensorize zero points"));
    }
    if n == 1 {
        return Ok(vec![1]);
    }
    let mut dims = Vec::new();
    let mut rest = n;
    let mut p = 2;
    while p * p <= rest {
        while rest % p == 0 {
            dims.push(p);
            rest /= p;
        }
        p += 1;
    }
    if rest > 1 {
        dims.push(rest);
    }
    Ok(dims)
}

pub fn row_to_tt(row: &[f64], dims: &[usize], policy: TruncationPolicy) -> Result<TtVector> {
    TtVector::from_dense(row, dims, policy)
}
