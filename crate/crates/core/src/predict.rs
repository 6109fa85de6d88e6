//! Predictions with `±3σ` bounds, classification and evaluation metrics.

use std::io::Write;

use crate::data::{fmt_f64, Centering, Inputs, Task};
use crate::dual::DualProblem;
use crate::filter::FilterState;
use crate::kernels::{row_to_tt, tensorize_dims, test_row, KernelSpec};
use crate::tt::{TruncationPolicy, TtMatrix, TtVector};
use crate::{Error, Result};

/// Everything needed to predict: the posterior of `α` plus the training
/// inputs that define the kernel expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub kernel: KernelSpec,
    /// Centered training inputs.
    pub x_train: Inputs,
    pub dims: Vec<usize>,
    pub m: TtVector,
    pub p: TtMatrix,
    pub sigma_r2: f64,
    pub gamma: f64,
    pub centering: Centering,
    /// Truncation of test kernel rows.
    pub policy_yt: TruncationPolicy,
    pub task: Task,
    /// False for point estimates without a covariance.
    pub has_confidence: bool,
}

impl TrainedModel {
    pub fn from_filter(
        problem: &DualProblem,
        state: FilterState,
        centering: Centering,
        task: Task,
        policy_yt: TruncationPolicy,
    ) -> Result<Self> {
        let model = TrainedModel {
            kernel: *problem.kernel(),
            x_train: problem.inputs().clone(),
            dims: state.dims(),
            m: state.m,
            p: state.p,
            sigma_r2: problem.sigma_r2(),
            gamma: problem.gamma(),
            centering,
            policy_yt,
            task,
            has_confidence: true,
        };
        model.validate()?;
        Ok(model)
    }

    /// Wraps dense dual weights with a zero covariance and no confidence.
    pub fn from_alpha(problem: &DualProblem, alpha: &[f64], centering: Centering, task: Task) -> Result<Self> {
        let dims = tensorize_dims(problem.len())?;
        let model = TrainedModel {
            kernel: *problem.kernel(),
            x_train: problem.inputs().clone(),
            m: TtVector::from_dense(alpha, &dims, TruncationPolicy::Exact)?,
            p: TtMatrix::zeros(&dims, &dims),
            dims,
            sigma_r2: problem.sigma_r2(),
            gamma: problem.gamma(),
            centering,
            policy_yt: TruncationPolicy::Exact,
            task,
            has_confidence: false,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        self.policy_yt.validate()?;
        let n: usize = self.dims.iter().product();
        if n != self.x_train.len() {
            return Err(Error::invalid(format!(
                "dims {:?} do not match {} training points",
                self.dims,
                self.x_train.len()
            )));
        }
        if self.m.dims() != self.dims || self.p.row_dims() != self.dims || self.p.col_dims() != self.dims {
            return Err(Error::invalid("mean or covariance dims do not match the model dims"));
        }
        if !(self.sigma_r2 > 0.0) {
            return Err(Error::invalid("sigma_r2 must be positive"));
        }
        if self.centering.x_means.len() != self.x_train.features() {
            return Err(Error::invalid("centering record does not match the feature count"));
        }
        Ok(())
    }

    pub fn features(&self) -> usize {
        self.x_train.features()
    }

    fn row(&self, x_star: &[f64]) -> Result<TtVector> {
        let x = self.centering.center_point(x_star);
        let dense = test_row(&self.kernel, &self.x_train, &x)?;
        row_to_tt(&dense, &self.dims, self.policy_yt)
    }

    pub fn predict_mean(&self, x_star: &[f64]) -> Result<f64> {
        Ok(self.row(x_star)?.dot(&self.m)? + self.centering.y_mean)
    }

    /// `cᵀ P c + σ_r²`, with a negative quadratic form clamped to zero.
    pub fn predict_variance(&self, x_star: &[f64]) -> Result<Variance> {
        let c = self.row(x_star)?;
        self.variance_of(&c)
    }

    fn variance_of(&self, c: &TtVector) -> Result<Variance> {
        let q = c.dot(&self.p.matvec(c)?)?;
        Ok(if q < 0.0 {
            Variance { value: self.sigma_r2, clamped: true }
        } else {
            Variance { value: q + self.sigma_r2, clamped: false }
        })
    }

    /// Mean and, when available, standard deviation for one point.
    pub fn predict_point(&self, x_star: &[f64]) -> Result<Prediction> {
        let c = self.row(x_star)?;
        let mean = c.dot(&self.m)? + self.centering.y_mean;
        if !self.has_confidence {
            return Ok(Prediction { mean, sigma: None, clamped: false });
        }
        let var = self.variance_of(&c)?;
        Ok(Prediction {
            mean,
            sigma: Some(var.value.sqrt()),
            clamped: var.clamped,
        })
    }

    pub fn predict_batch(&self, x: &Inputs) -> Result<Batch> {
        if x.features() != self.features() {
            return Err(Error::invalid(format!(
                "test data has {} features, model expects {}",
                x.features(),
                self.features()
            )));
        }
        let mut points = Vec::with_capacity(x.len());
        for row in x.rows() {
            points.push(self.predict_point(row)?);
        }
        let clamped = points.iter().filter(|p| p.clamped).count();
        Ok(Batch { points, clamped })
    }

    pub fn classify(&self, x_star: &[f64]) -> Result<Classification> {
        let p = self.predict_point(x_star)?;
        Ok(classify_prediction(&p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variance {
    pub value: f64,
    /// The quadratic form was negative and has been replaced by zero.
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub sigma: Option<f64>,
    pub clamped: bool,
}

impl Prediction {
    pub fn lower(&self) -> Option<f64> {
        self.sigma.map(|s| self.mean - 3.0 * s)
    }

    pub fn upper(&self) -> Option<f64> {
        self.sigma.map(|s| self.mean + 3.0 * s)
    }

    pub fn label(&self) -> f64 {
        sign(self.mean)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub points: Vec<Prediction>,
    /// Number of clamped variances.
    pub clamped: usize,
}

impl Batch {
    pub fn means(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean).collect()
    }

    /// Standard deviations, or `None` if the model has no covariance.
    pub fn sigmas(&self) -> Option<Vec<f64>> {
        self.points.iter().map(|p| p.sigma).collect()
    }

    /// Writes `x1,…,xf,y_hat,sigma,lower,upper` plus `label` for
    /// classification. Bounds are left empty without a covariance.
    pub fn write_csv(&self, x: &Inputs, task: Task, mut w: impl Write) -> Result<()> {
        if x.len() != self.points.len() {
            return Err(Error::invalid(format!(
                "{} inputs for {} predictions",
                x.len(),
                self.points.len()
            )));
        }
        let mut header: Vec<String> = (1..=x.features()).map(|j| format!("x{j}")).collect();
        header.extend(["y_hat", "sigma", "lower", "upper"].map(String::from));
        if task == Task::Classification {
            header.push("label".into());
        }
        writeln!(w, "{}", header.join(","))?;
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        for (row, p) in x.rows().zip(&self.points) {
            let mut fields: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
            fields.push(fmt_f64(p.mean));
            fields.push(opt(p.sigma));
            fields.push(opt(p.lower()));
            fields.push(opt(p.upper()));
            if task == Task::Classification {
                fields.push(fmt_f64(p.label()));
            }
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub label: f64,
    pub mean: f64,
    pub sigma: Option<f64>,
    /// Both `ŷ ± 3σ` lie on the same side of zero.
    pub confident: bool,
}

pub fn classify_prediction(p: &Prediction) -> Classification {
    let confident = match (p.lower(), p.upper()) {
        (Some(lo), Some(hi)) => lo > 0.0 || hi < 0.0,
        _ => false,
    };
    Classification {
        label: p.label(),
        mean: p.mean,
        sigma: p.sigma,
        confident,
    }
}

/// `sign(0) = +1`.
pub fn sign(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::invalid(format!(
            "metric inputs must be nonempty and equal in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

pub fn metric_rmse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_lengths(y, y_hat)?;
    let sse: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sse / y.len() as f64).sqrt())
}

/// `100 (1 − ‖y − ŷ‖ / ‖y − mean(ŷ)‖)`; `None` when the denominator is zero.
pub fn metric_fit(y: &[f64], y_hat: &[f64]) -> Result<Option<f64>> {
    check_lengths(y, y_hat)?;
    let mean_hat = y_hat.iter().sum::<f64>() / y_hat.len() as f64;
    let num: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let den: f64 = y.iter().map(|a| (a - mean_hat) * (a - mean_hat)).sum::<f64>().sqrt();
    Ok((den > 0.0).then(|| 100.0 * (1.0 - num / den)))
}

/// Percentage of matching signs.
pub fn metric_labeled(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_lengths(y, y_hat)?;
    let hits = y.iter().zip(y_hat).filter(|(a, b)| sign(**a) == sign(**b)).count();
    Ok(100.0 * hits as f64 / y.len() as f64)
}

/// Percentage of targets inside `ŷ ± 3σ`.
pub fn metric_confidence(y: &[f64], y_hat: &[f64], sigma: &[f64]) -> Result<f64> {
    check_lengths(y, y_hat)?;
    check_lengths(y, sigma)?;
    let inside = y
        .iter()
        .zip(y_hat)
        .zip(sigma)
        .filter(|((a, b), s)| (*a - *b).abs() <= 3.0 * **s)
        .count();
    Ok(100.0 * inside as f64 / y.len() as f64)
}

/// Percentage of labels for which both `ŷ ± 3σ` carry the true sign, i.e.
/// the bounds used as decision functions agree with the label.
pub fn metric_confident_labels(y: &[f64], y_hat: &[f64], sigma: &[f64]) -> Result<f64> {
    check_lengths(y, y_hat)?;
    check_lengths(y, sigma)?;
    let hits = y
        .iter()
        .zip(y_hat)
        .zip(sigma)
        .filter(|((a, b), s)| {
            if sign(**a) > 0.0 {
                *b - 3.0 * *s > 0.0
            } else {
                *b + 3.0 * *s < 0.0
            }
        })
        .count();
    Ok(100.0 * hits as f64 / y.len() as f64)
}
