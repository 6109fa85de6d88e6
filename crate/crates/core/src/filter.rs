//! Tensor-network Kalman filter over the rows of the dual system.
//!
//! State model: `α_k = α_{k−1} + q_k`, measurement `y_k = c_kᵀ α_k + r_k`
//! with `c_k` the `k`-th row of `C = Ω + I/γ`. The process noise is
//! `Q = (λ⁻¹ − 1) P_{k−1}`, applied as `P⁻ = P / λ`.

use std::ops::ControlFlow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dual::DualProblem;
use crate::kernels::{row_to_tt, tensorize_dims};
use crate::tt::{TruncationPolicy, TtMatrix, TtVector};
use crate::{Error, Result};

/// Truncation for each filter variable.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Policies {
    /// Mean `m`.
    pub m: TruncationPolicy,
    /// Kernel rows `c_k`.
    pub c: TruncationPolicy,
    /// Covariance `P`.
    pub p: TruncationPolicy,
    /// Gain `k_k`.
    pub k: TruncationPolicy,
}

impl Policies {
    pub fn uniform(p: TruncationPolicy) -> Self {
        Policies { m: p, c: p, p, k: p }
    }

    pub fn validate(&self) -> Result<()> {
        self.m.validate()?;
        self.c.validate()?;
        self.p.validate()?;
        self.k.validate()
    }
}

/// Stop once `‖P‖_F` has been small and flat for `patience` iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarlyStop {
    pub p_norm_threshold: f64,
    /// Bound on `|‖P_k‖_F − ‖P_{k−1}‖_F|`.
    pub p_norm_delta_threshold: f64,
    pub patience: usize,
}

impl EarlyStop {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_norm_threshold >= 0.0) || !(self.p_norm_delta_threshold >= 0.0) {
            return Err(Error::invalid("early-stop thresholds must be >= 0"));
        }
        if self.patience == 0 {
            return Err(Error::invalid("early-stop patience must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RowOrder {
    /// Rows in dataset order.
    #[default]
    Natural,
    /// A seeded permutation.
    Shuffled(u64),
}

impl RowOrder {
    pub fn permutation(&self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        if let RowOrder::Shuffled(seed) = *self {
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        }
        idx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    /// Forgetting factor in `(0, 1]`.
    pub lambda: f64,
    pub policies: Policies,
    pub early_stop: Option<EarlyStop>,
    /// `None` runs every row once.
    pub max_iterations: Option<usize>,
    pub row_order: RowOrder,
    /// Symmetrize `P` every this many steps; `0` disables it.
    pub sym_every: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            lambda: 1.0,
            policies: Policies::default(),
            early_stop: None,
            max_iterations: None,
            row_order: RowOrder::Natural,
            sym_every: 0,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::invalid(format!("lambda must be in (0, 1], got {}", self.lambda)));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::invalid("max_iterations must be >= 1"));
        }
        self.policies.validate()?;
        if let Some(es) = &self.early_stop {
            es.validate()?;
        }
        Ok(())
    }
}

/// One filter iteration as recorded in the trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    /// One-based iteration number.
    pub k: usize,
    /// Row of the dual system used at this iteration.
    pub row: usize,
    /// Innovation `v_k`.
    pub v: f64,
    /// Innovation variance `s_k`.
    pub s: f64,
    pub p_norm: f64,
    pub max_rank_m: usize,
    pub max_rank_p: usize,
    pub elapsed_ms: f64,
}

impl TraceRecord {
    pub const CSV_HEADER: &'static str = "k,v_k,s_k,p_frobenius,max_rank_m,max_rank_P,elapsed_ms";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{:.16e},{:.16e},{:.16e},{},{},{:.3}",
            self.k, self.v, self.s, self.p_norm, self.max_rank_m, self.max_rank_p, self.elapsed_ms
        )
    }
}

/// Filter state: posterior mean and covariance of `α` after `k` rows.
#[derive(Debug, Clone)]
pub struct FilterState {
    pub m: TtVector,
    pub p: TtMatrix,
    pub k: usize,
    pub trace: Vec<TraceRecord>,
    clock: Clock,
}

impl FilterState {
    /// Zero mean and `prior_variance · I` covariance over `tensorize_dims(n)`.
    pub fn new(n: usize, prior_variance: f64) -> Result<Self> {
        if !(prior_variance >= 0.0) || !prior_variance.is_finite() {
            return Err(Error::invalid(format!("prior variance must be >= 0, got {prior_variance}")));
        }
        let dims = tensorize_dims(n)?;
        Ok(FilterState {
            m: TtVector::zeros(&dims),
            p: TtMatrix::scaled_identity(prior_variance, &dims),
            k: 0,
            trace: Vec::new(),
            clock: Clock::start(),
        })
    }

    pub fn dims(&self) -> Vec<usize> {
        self.m.dims()
    }

    /// One prediction and measurement update with row `c` and target `y`.
    pub fn step(&mut self, c: &TtVector, y: f64, row: usize, sigma_r2: f64, cfg: &FilterConfig) -> Result<()> {
        if c.dims() != self.m.dims() {
            return Err(Error::invalid(format!(
                "row dims {:?} do not match state dims {:?}",
                c.dims(),
                self.m.dims()
            )));
        }
        let iteration = self.k + 1;
        let pol = &cfg.policies;
        let p_minus = if cfg.lambda == 1.0 {
            self.p.clone()
        } else {
            self.p.scale(1.0 / cfg.lambda)
        };
        let pc = p_minus.matvec(c)?;
        let s = c.dot(&pc)? + sigma_r2;
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::CovarianceCollapse { iteration, s });
        }
        let v = y - c.dot(&self.m)?;
        let gain = pc.scale(1.0 / s).round(pol.k)?;
        let m = self.m.add(&gain.scale(v))?.round(pol.m)?;
        let update = TtMatrix::outer(&gain, &gain)?.scale(-s);
        let mut p = p_minus.add(&update)?.round(pol.p)?;
        if cfg.sym_every > 0 && iteration % cfg.sym_every == 0 {
            p = p.add(&p.transpose())?.scale(0.5).round(pol.p)?;
        }
        self.m = m;
        self.p = p;
        self.k = iteration;
        self.trace.push(TraceRecord {
            k: iteration,
            row,
            v,
            s,
            p_norm: self.p.frobenius_norm(),
            max_rank_m: self.m.max_rank(),
            max_rank_p: self.p.max_rank(),
            elapsed_ms: self.clock.elapsed_ms(),
        });
        Ok(())
    }

    /// Peak storage of the state in `f64` entries.
    pub fn storage(&self) -> usize {
        self.m.storage() + self.p.storage()
    }
}

/// True when the last `patience` records all have `‖P‖_F` below the
/// threshold and a step change no larger than the delta threshold. The
/// first record of a trace has no predecessor and passes the delta test.
pub fn early_stop_check(trace: &[TraceRecord], es: &EarlyStop) -> bool {
    if trace.len() < es.patience {
        return false;
    }
    let start = trace.len() - es.patience;
    (start..trace.len()).all(|i| {
        let r = &trace[i];
        let flat = i == 0 || (r.p_norm - trace[i - 1].p_norm).abs() <= es.p_norm_delta_threshold;
        r.p_norm < es.p_norm_threshold && flat
    })
}

/// Why training stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    AllRows,
    MaxIterations,
    EarlyStop,
    Callback,
}

#[derive(Debug, Clone)]
pub struct FilterRun {
    pub state: FilterState,
    pub stop: StopReason,
}

/// Runs the filter over the rows of `problem`.
pub fn train(problem: &DualProblem, cfg: &FilterConfig) -> Result<FilterRun> {
    train_with(problem, cfg, |_| ControlFlow::Continue(()))
}

/// [`train`] with a callback after every step; returning
/// `ControlFlow::Break` stops training.
pub fn train_with(
    problem: &DualProblem,
    cfg: &FilterConfig,
    mut on_step: impl FnMut(&FilterState) -> ControlFlow<()>,
) -> Result<FilterRun> {
    cfg.validate()?;
    let n = problem.len();
    let mut state = FilterState::new(n, problem.prior_variance())?;
    let dims = state.dims();
    let order = cfg.row_order.permutation(n);
    let limit = cfg.max_iterations.map_or(n, |m| m.min(n));
    let y = problem.targets();
    for &row in order.iter().take(limit) {
        let dense = problem.row(row)?;
        let c = row_to_tt(&dense, &dims, cfg.policies.c)?;
        state.step(&c, y[row], row, problem.sigma_r2(), cfg)?;
        if let Some(es) = &cfg.early_stop {
            if early_stop_check(&state.trace, es) {
                return Ok(FilterRun { state, stop: StopReason::EarlyStop });
            }
        }
        if on_step(&state).is_break() {
            return Ok(FilterRun { state, stop: StopReason::Callback });
        }
    }
    let stop = if limit < n { StopReason::MaxIterations } else { StopReason::AllRows };
    Ok(FilterRun { state, stop })
}

/// Wall clock that reads zero where no monotonic clock exists.
#[derive(Debug, Clone, Copy)]
struct Clock {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Clock {
    fn start() -> Self {
        Clock {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn elapsed_ms(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64() * 1e3
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}
