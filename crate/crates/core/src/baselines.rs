//! Nyström low-rank solver and kernel eigenvalue spectra.

use faer::{Mat, MatRef};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{Centering, Inputs, Task};
use crate::dual::{kernel_matrix, DualProblem};
use crate::kernels::KernelSpec;
use crate::linalg;
use crate::predict::TrainedModel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NystromConfig {
    /// Number of sampled columns `S`.
    pub samples: usize,
    /// Number of retained eigenpairs `EV`.
    pub eigenpairs: usize,
    pub seed: u64,
}

impl NystromConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.eigenpairs == 0 || self.eigenpairs > self.samples || self.samples > n {
            return Err(Error::invalid(format!(
                "need 1 <= EV <= S <= N, got EV={}, S={}, N={n}",
                self.eigenpairs, self.samples
            )));
        }
        Ok(())
    }
}

/// `s` distinct indices from `0..n`, sorted, reproducible by seed.
pub fn uniform_sample(n: usize, s: usize, seed: u64) -> Result<Vec<usize>> {
    if s > n {
        return Err(Error::invalid(format!("cannot sample {s} of {n} points")));
    }
    if s == n {
        return Ok((0..n).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, s).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Sampled blocks up to this many entries are held in memory; larger ones
/// are recomputed on every product.
pub const BLOCK_CACHE_ENTRIES: usize = 320_000_000;

/// Full dense eigensolves are used up to this sample size.
pub const DENSE_EIGEN_LIMIT: usize = 2048;

/// Result of the Nyström solve.
#[derive(Debug, Clone, PartialEq)]
pub struct NystromFit {
    pub alpha: Vec<f64>,
    /// Retained eigenvalues of the sampled block, descending.
    pub eigenvalues: Vec<f64>,
    pub samples: Vec<usize>,
}

/// Dual weights from the Nyström approximation `Ω ≈ Ũ Λ̃ Ũᵀ`, solved with
/// the Woodbury identity
/// `(I/γ + Ũ Λ̃ Ũᵀ)⁻¹ = γ I − γ² Ũ (Λ̃⁻¹ + γ ŨᵀŨ)⁻¹ Ũᵀ`.
pub fn nystrom_fit(problem: &DualProblem, cfg: &NystromConfig) -> Result<NystromFit> {
    let n = problem.len();
    cfg.validate(n)?;
    let x = problem.inputs();
    let kernel = problem.kernel();
    let samples = uniform_sample(n, cfg.samples, cfg.seed)?;
    let xs = x.select(&samples);
    let (lambda, u) = top_eigenpairs(kernel, &xs, cfg.eigenpairs, cfg.seed)?;
    let ev = lambda.len();
    let lmax = lambda[0].max(0.0);
    let tol = lmax * cfg.samples as f64 * f64::EPSILON;
    if let Some(i) = lambda.iter().position(|&l| !(l > tol)) {
        return Err(Error::NumericalFailure(format!(
            "sampled kernel block is rank deficient: eigenvalue {} is {:e}",
            i + 1,
            lambda[i]
        )));
    }
    let (nf, sf) = (n as f64, cfg.samples as f64);
    // Ũ = √(S/N) K_{N,S} U Λ⁻¹, Λ̃ = (N/S) Λ.
    let scale: Vec<f64> = lambda.iter().map(|l| (sf / nf).sqrt() / l).collect();
    let mut ut = Mat::<f64>::zeros(n, ev);
    let mut krow = vec![0.0; cfg.samples];
    for i in 0..n {
        for (k, xj) in krow.iter_mut().zip(xs.rows()) {
            *k = kernel.eval_unchecked(x.row(i), xj);
        }
        for j in 0..ev {
            let dot: f64 = krow.iter().enumerate().map(|(s, k)| k * u[(s, j)]).sum();
            ut[(i, j)] = dot * scale[j];
        }
    }
    let gamma = problem.gamma();
    let y = problem.targets();
    let ycol = Mat::from_fn(n, 1, |i, _| y[i]);
    let mut inner = ut.transpose() * &ut * gamma;
    for (j, l) in lambda.iter().enumerate() {
        inner[(j, j)] += 1.0 / ((nf / sf) * l);
    }
    let uty = ut.transpose() * &ycol;
    let z = linalg::spd_solve(inner.as_ref(), uty.as_ref(), "Nyström inner system")?;
    let corr = &ut * z;
    let alpha = (0..n).map(|i| gamma * y[i] - gamma * gamma * corr[(i, 0)]).collect();
    Ok(NystromFit {
        alpha,
        eigenvalues: lambda,
        samples,
    })
}

/// [`nystrom_fit`] wrapped as a model without confidence bounds.
pub fn nystrom_solve(
    problem: &DualProblem,
    cfg: &NystromConfig,
    centering: Centering,
    task: Task,
) -> Result<TrainedModel> {
    let fit = nystrom_fit(problem, cfg)?;
    TrainedModel::from_alpha(problem, &fit.alpha, centering, task)
}

/// Top `k` eigenpairs of the kernel matrix on `x`, eigenvalues descending
/// and eigenvectors as columns.
fn top_eigenpairs(kernel: &KernelSpec, x: &Inputs, k: usize, seed: u64) -> Result<(Vec<f64>, Mat<f64>)> {
    let s = x.len();
    if s <= DENSE_EIGEN_LIMIT {
        let w = kernel_matrix(kernel, x)?;
        let (vals, vecs) = linalg::sym_eigen_desc(w.as_ref())?;
        let u = Mat::from_fn(s, k, |i, j| vecs[(i, j)]);
        return Ok((vals[..k].to_vec(), u));
    }
    let op = KernelOperator::new(kernel, x);
    lanczos_top(&op, s, k, seed)
}

/// Matrix-vector products with a kernel matrix, cached when it fits.
struct KernelOperator<'a> {
    kernel: &'a KernelSpec,
    x: &'a Inputs,
    cache: Option<Vec<f64>>,
}

impl<'a> KernelOperator<'a> {
    fn new(kernel: &'a KernelSpec, x: &'a Inputs) -> Self {
        let s = x.len();
        let cache = (s.saturating_mul(s) <= BLOCK_CACHE_ENTRIES).then(|| {
            let mut w = vec![0.0; s * s];
            for i in 0..s {
                for j in 0..=i {
                    let v = kernel.eval_unchecked(x.row(i), x.row(j));
                    w[i * s + j] = v;
                    w[j * s + i] = v;
                }
            }
            w
        });
        KernelOperator { kernel, x, cache }
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let s = self.x.len();
        match &self.cache {
            Some(w) => {
                let res = MatRef::from_row_major_slice(w, s, s) * MatRef::from_column_major_slice(v, s, 1);
                for (o, r) in out.iter_mut().zip(res.col(0).iter()) {
                    *o = *r;
                }
            }
            None => {
                for (i, o) in out.iter_mut().enumerate() {
                    let xi = self.x.row(i);
                    *o = self
                        .x
                        .rows()
                        .zip(v)
                        .map(|(xj, vj)| self.kernel.eval_unchecked(xi, xj) * vj)
                        .sum();
                }
            }
        }
    }
}

/// Lanczos with full reorthogonalization for the `k` largest eigenpairs of a
/// symmetric operator of size `n`.
fn lanczos_top(op: &KernelOperator<'_>, n: usize, k: usize, seed: u64) -> Result<(Vec<f64>, Mat<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut q = random_unit(n, &mut rng, &[]);
    let mut w = vec![0.0; n];
    let mut target = (2 * k + 20).min(n);
    loop {
        while basis.len() < target {
            op.apply(&q, &mut w);
            let a = dot(&w, &q);
            basis.push(q.clone());
            alphas.push(a);
            // Full reorthogonalization, twice for stability.
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&w, b);
                    axpy(-c, b, &mut w);
                }
            }
            let beta = dot(&w, &w).sqrt();
            if basis.len() == n {
                break;
            }
            if beta <= 1e-12 * alphas.iter().fold(0.0f64, |m, a| m.max(a.abs())).max(1.0) {
                // Invariant subspace found; continue with a fresh direction.
                betas.push(0.0);
                q = random_unit(n, &mut rng, &basis);
            } else {
                betas.push(beta);
                q = w.iter().map(|v| v / beta).collect();
            }
        }
        let m = basis.len();
        let t = Mat::from_fn(m, m, |i, j| {
            if i == j {
                alphas[i]
            } else if i + 1 == j {
                betas[i]
            } else if j + 1 == i {
                betas[j]
            } else {
                0.0
            }
        });
        let (theta, y) = linalg::sym_eigen_desc(t.as_ref())?;
        let scale = theta[0].abs().max(f64::MIN_POSITIVE);
        let last_beta = if m < n { betas[m - 1] } else { 0.0 };
        let converged = (0..k.min(m)).all(|j| (last_beta * y[(m - 1, j)]).abs() <= 1e-10 * scale);
        if (converged && m >= k) || m == n {
            let vecs = Mat::from_fn(n, k, |i, j| (0..m).map(|l| basis[l][i] * y[(l, j)]).sum());
            return Ok((theta[..k].to_vec(), vecs));
        }
        target = (m + k.max(20)).min(n);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng, against: &[Vec<f64>]) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    for b in against {
        let c = dot(&v, b);
        axpy(-c, b, &mut v);
    }
    let nrm = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= nrm);
    v
}

/// Eigenvalues of the kernel matrix `Ω` (no `I/γ` shift), descending.
pub fn kernel_spectrum(kernel: &KernelSpec, x: &Inputs) -> Result<Vec<f64>> {
    let w = kernel_matrix(kernel, x)?;
    linalg::sym_eigenvalues_desc(w.as_ref())
}

/// Spectra for several sizes; `make` builds the inputs for one size.
pub fn spectrum(
    kernel: &KernelSpec,
    sizes: &[usize],
    mut make: impl FnMut(usize) -> Result<Inputs>,
) -> Result<Vec<(usize, Vec<f64>)>> {
    sizes
        .iter()
        .map(|&s| Ok((s, kernel_spectrum(kernel, &make(s)?)?)))
        .collect()
}

/// Number of eigenvalues above `rel · λ_max`.
pub fn count_above(eigs: &[f64], rel: f64) -> usize {
    let lmax = eigs.first().copied().unwrap_or(0.0);
    eigs.iter().filter(|&&l| l > rel * lmax).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling() {
        assert_eq!(uniform_sample(5, 5, 1).unwrap(), vec![0, 1, 2, 3, 4]);
        let one = uniform_sample(10, 1, 1).unwrap();
        assert!(one.len() == 1 && one[0] < 10);
        let a = uniform_sample(100, 10, 4).unwrap();
        assert_eq!(a, uniform_sample(100, 10, 4).unwrap());
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(uniform_sample(3, 4, 0).is_err());
    }

    #[test]
    fn config_bounds() {
        let c = NystromConfig { samples: 4, eigenpairs: 5, seed: 0 };
        assert!(c.validate(10).is_err());
        let c = NystromConfig { samples: 11, eigenpairs: 5, seed: 0 };
        assert!(c.validate(10).is_err());
    }

    #[test]
    fn flat_spectrum_for_orthonormal_inputs() {
        let x = Inputs::new(3, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let eigs = kernel_spectrum(&KernelSpec::Linear, &x).unwrap();
        assert!(eigs.iter().all(|l| (l - 1.0).abs() < 1e-12));
        assert_eq!(count_above(&eigs, 1e-3), 3);
    }

    #[test]
    fn lanczos_matches_dense() {
        let n = 300;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let x = Inputs::new(n, 1, xs).unwrap();
        let kernel = KernelSpec::Rbf { sigma2: 0.01 };
        let dense = kernel_spectrum(&kernel, &x).unwrap();
        let op = KernelOperator::new(&kernel, &x);
        let (vals, vecs) = lanczos_top(&op, n, 8, 1).unwrap();
        for (a, b) in vals.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-8 * dense[0]);
        }
        // residual of the leading pair
        let v: Vec<f64> = (0..n).map(|i| vecs[(i, 0)]).collect();
        let mut av = vec![0.0; n];
        op.apply(&v, &mut av);
        let res: f64 = av.iter().zip(&v).map(|(a, b)| (a - vals[0] * b).powi(2)).sum::<f64>().sqrt();
        assert!(res < 1e-6 * vals[0]);
        let uncached = KernelOperator { cache: None, ..op };
        let mut av2 = vec![0.0; n];
        uncached.apply(&v, &mut av2);
        assert!(av.iter().zip(&av2).all(|(a, b)| (a - b).abs() < 1e-10));
    }
}
