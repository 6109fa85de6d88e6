//! The LS-SVM dual problem and its dense reference solvers.
//!
//! With centered data the bias drops out and the dual system is
//! `C α = y` with `C = Ω + I/γ`. The dense solvers here are oracles for
//! small problems; training at scale goes through [`crate::filter`].

use faer::Mat;

use crate::data::{Dataset, Inputs};
use crate::kernels::{kernel_row, KernelSpec};
use crate::linalg;
use crate::{Error, Result};

/// Largest `N` the dense oracles accept by default.
pub const DENSE_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct DualProblem {
    x: Inputs,
    y: Vec<f64>,
    kernel: KernelSpec,
    gamma: f64,
    sigma_e2: Option<f64>,
    sigma_r2: f64,
}

impl DualProblem {
    /// `sigma_e2 = None` selects the fallback prior `P₀ = σ_r² I`.
    pub fn new(
        x: Inputs,
        y: Vec<f64>,
        kernel: KernelSpec,
        gamma: f64,
        sigma_e2: Option<f64>,
        sigma_r2: f64,
    ) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::invalid("dual problem needs at least one point"));
        }
        if x.len() != y.len() {
            return Err(Error::invalid(format!("{} inputs but {} targets", x.len(), y.len())));
        }
        kernel.validate()?;
        positive("gamma", gamma)?;
        positive("sigma_r2", sigma_r2)?;
        if let Some(s) = sigma_e2 {
            positive("sigma_e2", s)?;
        }
        Ok(DualProblem { x, y, kernel, gamma, sigma_e2, sigma_r2 })
    }

    pub fn from_dataset(
        d: &Dataset,
        kernel: KernelSpec,
        gamma: f64,
        sigma_e2: Option<f64>,
        sigma_r2: f64,
    ) -> Result<Self> {
        Self::new(d.x.clone(), d.y.clone(), kernel, gamma, sigma_e2, sigma_r2)
    }

    pub fn inputs(&self) -> &Inputs {
        &self.x
    }

    pub fn targets(&self) -> &[f64] {
        &self.y
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn sigma_e2(&self) -> Option<f64> {
        self.sigma_e2
    }

    pub fn sigma_r2(&self) -> f64 {
        self.sigma_r2
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Diagonal of the prior covariance `P₀`.
    pub fn prior_variance(&self) -> f64 {
        match self.sigma_e2 {
            Some(s) => prior_covariance(self.gamma, s),
            None => self.sigma_r2,
        }
    }

    /// Row `k` of `C`.
    pub fn row(&self, k: usize) -> Result<Vec<f64>> {
        kernel_row(&self.kernel, &self.x, k, self.gamma)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {v}")))
    }
}

/// `γ² σ_e²`: since `α_k = γ e_k`, a residual variance `σ_e²` induces this
/// prior variance on each dual weight.
pub fn prior_covariance(gamma: f64, sigma_e2: f64) -> f64 {
    gamma * gamma * sigma_e2
}

fn check_cap(n: usize) -> Result<()> {
    if n > DENSE_CAP {
        return Err(Error::ResourceLimit {
            what: "dense dual matrix rows",
            requested: n,
            cap: DENSE_CAP,
        });
    }
    Ok(())
}

/// Kernel matrix `Ω` without the `I/γ` shift.
pub fn kernel_matrix(kernel: &KernelSpec, x: &Inputs) -> Result<Mat<f64>> {
    check_cap(x.len())?;
    kernel.validate()?;
    let n = x.len();
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval_unchecked(x.row(i), x.row(j));
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// `C = Ω + I/γ`.
pub fn assemble_dense(p: &DualProblem) -> Result<Mat<f64>> {
    let mut c = kernel_matrix(&p.kernel, &p.x)?;
    for i in 0..p.len() {
        c[(i, i)] += 1.0 / p.gamma;
    }
    Ok(c)
}

fn col(v: &[f64]) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

/// Solves `C α = y` directly.
pub fn solve_dense_direct(p: &DualProblem) -> Result<Vec<f64>> {
    let c = assemble_dense(p)?;
    let a = linalg::spd_solve(c.as_ref(), col(&p.y).as_ref(), "dual matrix C")?;
    Ok(a.col(0).iter().copied().collect())
}

/// Batch Gaussian posterior of `α` under `y = C α + r`, `r ~ N(0, σ_r² I)`,
/// `α ~ N(0, P₀)`: `P = (P₀⁻¹ + CᵀC/σ_r²)⁻¹`, `m = P Cᵀ y / σ_r²`.
pub fn posterior_dense(p: &DualProblem) -> Result<(Vec<f64>, Mat<f64>)> {
    let c = assemble_dense(p)?;
    let n = p.len();
    let inv_r = 1.0 / p.sigma_r2;
    let mut a = c.transpose() * &c * inv_r;
    let inv_p0 = 1.0 / p.prior_variance();
    for i in 0..n {
        a[(i, i)] += inv_p0;
    }
    let mut cov = linalg::spd_inverse(a.as_ref(), "posterior precision")?;
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = s;
            cov[(j, i)] = s;
        }
    }
    let rhs = c.transpose() * col(&p.y) * inv_r;
    let m = &cov * rhs;
    Ok((m.col(0).iter().copied().collect(), cov))
}

/// Solves the bordered system `[0 1ᵀ; 1 C] [b; α] = [0; y]` with the bias
/// kept explicitly. Used to check that centering reproduces it.
pub fn solve_bordered(p: &DualProblem) -> Result<(f64, Vec<f64>)> {
    let c = assemble_dense(p)?;
    let n = p.len();
    // Schur complement on b: 1ᵀ C⁻¹ 1 · b = 1ᵀ C⁻¹ y.
    let ones = Mat::from_fn(n, 1, |_, _| 1.0);
    let rhs = Mat::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { p.y[i] });
    let sol = linalg::spd_solve(c.as_ref(), rhs.as_ref(), "dual matrix C")?;
    let u = sol.col(0);
    let v = sol.col(1);
    let s: f64 = ones.col(0).iter().zip(u.iter()).map(|(a, b)| a * b).sum();
    let t: f64 = v.iter().sum();
    if s.abs() < f64::EPSILON {
        return Err(Error::NumericalFailure("bordered system is singular".into()));
    }
    let b = t / s;
    let alpha = (0..n).map(|i| v[i] - b * u[i]).collect();
    Ok((b, alpha))
}
