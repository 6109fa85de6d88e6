//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export has a plain Rust counterpart returning `tnkf::Result`, so
//! the logic is tested natively and the bindings only convert errors.

use tnkf::baselines::{count_above, kernel_spectrum};
use tnkf::data::{center, gen_noisy_sinc, gen_two_spiral_scaled, sinc};
use tnkf::dual::DualProblem;
use tnkf::filter::{train, FilterConfig, Policies};
use tnkf::kernels::{kernel_row, row_to_tt, tensorize_dims, KernelSpec};
use tnkf::predict::{metric_rmse, TrainedModel};
use tnkf::tt::TruncationPolicy;
use tnkf::{Error, Result};
use wasm_bindgen::prelude::*;

/// Largest power-of-two exponent the page may request.
pub const MAX_EXPONENT: u32 = 10;

fn policy(eps: f64) -> Result<TruncationPolicy> {
    if eps == 0.0 {
        Ok(TruncationPolicy::Exact)
    } else {
        TruncationPolicy::relative(eps)
    }
}

fn check_exponent(e: u32) -> Result<usize> {
    if !(1..=MAX_EXPONENT).contains(&e) {
        return Err(Error::InvalidArgument(format!("exponent must be in 1..={MAX_EXPONENT}, got {e}")));
    }
    Ok(1 << e)
}

/// Noisy sinc fit with its `±3σ` band on an evaluation grid.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct SincFit {
    x: Vec<f64>,
    y: Vec<f64>,
    grid: Vec<f64>,
    truth: Vec<f64>,
    mean: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rmse: f64,
    max_rank_p: usize,
}

#[wasm_bindgen]
impl SincFit {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn y(&self) -> Vec<f64> {
        self.y.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn grid(&self) -> Vec<f64> {
        self.grid.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn truth(&self) -> Vec<f64> {
        self.truth.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn mean(&self) -> Vec<f64> {
        self.mean.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn lower(&self) -> Vec<f64> {
        self.lower.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn upper(&self) -> Vec<f64> {
        self.upper.clone()
    }

    /// RMSE against the noise-free curve on the grid.
    #[wasm_bindgen(getter)]
    pub fn rmse(&self) -> f64 {
        self.rmse
    }

    #[wasm_bindgen(getter, js_name = maxRankP)]
    pub fn max_rank_p(&self) -> usize {
        self.max_rank_p
    }
}

pub fn sinc_fit(exponent: u32, noise: f64, seed: u32, gamma: f64, sigma2: f64, eps_p: f64) -> Result<SincFit> {
    let n = check_exponent(exponent)?;
    let data = gen_noisy_sinc(n, noise, seed as u64)?;
    let c = center(&data);
    let p = DualProblem::from_dataset(&c, KernelSpec::rbf(sigma2)?, gamma, Some(noise.max(1e-3).powi(2)), noise.max(1e-3).powi(2))?;
    let cfg = FilterConfig {
        policies: Policies { m: TruncationPolicy::Exact, c: policy(1e-3)?, p: policy(eps_p)?, k: policy(0.2)? },
        ..Default::default()
    };
    let run = train(&p, &cfg)?;
    let max_rank_p = run.state.p.max_rank();
    let model = TrainedModel::from_filter(&p, run.state, c.centering.expect("centered"), data.task, policy(1e-3)?)?;
    let grid: Vec<f64> = (0..=200).map(|i| -5.0 + 10.0 * i as f64 / 200.0).collect();
    let truth: Vec<f64> = grid.iter().map(|&x| sinc(x)).collect();
    let (mut mean, mut lower, mut upper) = (Vec::new(), Vec::new(), Vec::new());
    for &g in &grid {
        let pr = model.predict_point(&[g])?;
        mean.push(pr.mean);
        lower.push(pr.lower().unwrap_or(pr.mean));
        upper.push(pr.upper().unwrap_or(pr.mean));
    }
    Ok(SincFit {
        rmse: metric_rmse(&truth, &mean)?,
        x: data.x.as_slice().to_vec(),
        y: data.y,
        grid,
        truth,
        mean,
        lower,
        upper,
        max_rank_p,
    })
}

/// Trains on `2^exponent` noisy sinc samples and predicts on a grid.
#[wasm_bindgen(js_name = fitSinc)]
pub fn fit_sinc(exponent: u32, noise: f64, seed: u32, gamma: f64, sigma2: f64, eps_p: f64) -> Result<SincFit, JsError> {
    sinc_fit(exponent, noise, seed, gamma, sigma2, eps_p).map_err(|e| JsError::new(&e.to_string()))
}

/// One kernel row in dense and TT form.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct RowCompression {
    dense: Vec<f64>,
    approx: Vec<f64>,
    ranks: Vec<u32>,
    storage: usize,
    rel_error: f64,
}

#[wasm_bindgen]
impl RowCompression {
    #[wasm_bindgen(getter)]
    pub fn dense(&self) -> Vec<f64> {
        self.dense.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn approx(&self) -> Vec<f64> {
        self.approx.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn ranks(&self) -> Vec<u32> {
        self.ranks.clone()
    }

    /// Number of stored TT entries.
    #[wasm_bindgen(getter)]
    pub fn storage(&self) -> usize {
        self.storage
    }

    #[wasm_bindgen(getter, js_name = relError)]
    pub fn rel_error(&self) -> f64 {
        self.rel_error
    }
}

pub fn row_compression(exponent: u32, sigma2: f64, row: u32, eps: f64) -> Result<RowCompression> {
    let n = check_exponent(exponent)?;
    let data = gen_noisy_sinc(n, 0.0, 1)?;
    let k = (row as usize).min(n - 1);
    let dense = kernel_row(&KernelSpec::rbf(sigma2)?, &data.x, k, 1.0)?;
    let tt = row_to_tt(&dense, &tensorize_dims(n)?, policy(eps)?)?;
    let approx = tt.full()?;
    let err: f64 = dense.iter().zip(&approx).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let norm: f64 = dense.iter().map(|a| a * a).sum::<f64>().sqrt();
    Ok(RowCompression {
        ranks: tt.ranks().into_iter().map(|r| r as u32).collect(),
        storage: tt.storage(),
        rel_error: err / norm,
        dense,
        approx,
    })
}

/// Kernel row `k` of `Ω + I` over `2^exponent` points on [−5, 5],
/// compressed to a tensor train with relative tolerance `eps`.
#[wasm_bindgen(js_name = compressRow)]
pub fn compress_row(exponent: u32, sigma2: f64, row: u32, eps: f64) -> Result<RowCompression, JsError> {
    row_compression(exponent, sigma2, row, eps).map_err(|e| JsError::new(&e.to_string()))
}

/// Spectra of two-spiral kernel matrices.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Spectra {
    sizes: Vec<u32>,
    counts: Vec<u32>,
    /// All spectra, concatenated in `sizes` order.
    values: Vec<f64>,
}

#[wasm_bindgen]
impl Spectra {
    #[wasm_bindgen(getter)]
    pub fn sizes(&self) -> Vec<u32> {
        self.sizes.clone()
    }

    /// Eigenvalues above `level · λ_max` for each size.
    #[wasm_bindgen(getter)]
    pub fn counts(&self) -> Vec<u32> {
        self.counts.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }
}

pub fn spiral_spectra(sizes: &[u32], sigma2: f64, scale: f64, level: f64) -> Result<Spectra> {
    let kernel = KernelSpec::rbf(sigma2)?;
    let (mut counts, mut values) = (Vec::new(), Vec::new());
    for &n in sizes {
        if n as usize > 1 << MAX_EXPONENT {
            return Err(Error::InvalidArgument(format!("size {n} is above {}", 1 << MAX_EXPONENT)));
        }
        let eigs = kernel_spectrum(&kernel, &gen_two_spiral_scaled(n as usize, scale, 0.0, 1)?.x)?;
        counts.push(count_above(&eigs, level) as u32);
        values.extend(eigs);
    }
    Ok(Spectra { sizes: sizes.to_vec(), counts, values })
}

#[wasm_bindgen(js_name = spiralSpectra)]
pub fn spiral_spectra_js(sizes: Vec<u32>, sigma2: f64, scale: f64, level: f64) -> Result<Spectra, JsError> {
    spiral_spectra(&sizes, sigma2, scale, level).map_err(|e| JsError::new(&e.to_string()))
}
