use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::time::Instant;

use tnkf::baselines::{count_above, nystrom_solve, spectrum as eigen_spectrum, NystromConfig, BLOCK_CACHE_ENTRIES};
use tnkf::data::{
    center, fit_power_size, gen_noisy_sinc, gen_noisy_sinc_on, gen_two_spiral_scaled, load_csv, load_csv_with,
    CsvSchema, Dataset, Encoder, Inputs, Subsample, Task,
};
use tnkf::dual::{solve_dense_direct, DualProblem, DENSE_CAP};
use tnkf::filter::{train_with, StopReason, TraceRecord};
use tnkf::kernels::KernelSpec;
use tnkf::persist::{load_model, save_model};
use tnkf::predict::{
    metric_confidence, metric_confident_labels, metric_fit, metric_labeled, metric_rmse, Batch, TrainedModel,
};

use crate::config::{Method, RunConfig, Settings};
use crate::error::{CliError, Result};
use crate::{DatasetKind, GenArgs, SpectrumArgs};

/// Standard output, or a file when a path is given.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            CliError::Data(format!("cannot write {}: {e}", p.display()))
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn gen(a: &GenArgs) -> Result<()> {
    let d = match a.dataset {
        DatasetKind::Sinc => match a.domain {
            Some(dom) => gen_noisy_sinc_on(a.n, a.noise, a.seed, dom)?,
            None => gen_noisy_sinc(a.n, a.noise, a.seed)?,
        },
        DatasetKind::TwoSpiral => gen_two_spiral_scaled(a.n, a.scale, a.jitter, a.seed)?,
    };
    let mut w = sink(a.out.as_deref())?;
    d.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

/// True when `n = b^d` for some `b, d >= 2`.
fn is_power(n: usize) -> bool {
    (2..=n.ilog2()).any(|d| {
        let b = (n as f64).powf(1.0 / d as f64).round() as usize;
        [b.saturating_sub(1), b, b + 1]
            .iter()
            .any(|&b| b >= 2 && b.checked_pow(d) == Some(n))
    })
}

fn encoder_path(model: &Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".encoder");
    PathBuf::from(s)
}

/// Stores category vocabularies and label names next to the model.
fn write_encoder(enc: &Encoder, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_path(path).map_err(tnkf::Error::from)?;
    if let Some([neg, pos]) = &enc.label_values {
        w.write_record(["label", neg, pos]).map_err(tnkf::Error::from)?;
    }
    for cats in &enc.categories {
        let mut rec = vec!["categories"];
        rec.extend(cats.iter().map(String::as_str));
        w.write_record(rec).map_err(tnkf::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

fn read_encoder(path: &Path) -> Result<Encoder> {
    let mut enc = Encoder::default();
    if !path.exists() {
        return Ok(enc);
    }
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(tnkf::Error::from)?;
    for rec in r.records() {
        let rec = rec.map_err(tnkf::Error::from)?;
        let fields: Vec<String> = rec.iter().map(str::to_string).collect();
        match fields.first().map(String::as_str) {
            Some("label") if fields.len() == 3 => enc.label_values = Some([fields[1].clone(), fields[2].clone()]),
            Some("categories") => enc.categories.push(fields[1..].to_vec()),
            _ => return Err(CliError::Data(format!("malformed encoder file {}", path.display()))),
        }
    }
    Ok(enc)
}

struct Training {
    data: Dataset,
    schema: CsvSchema,
    encoder: Encoder,
}

fn load_training(cfg: &RunConfig) -> Result<Training> {
    let path = cfg.require(&cfg.data, "data")?;
    let schema = cfg.schema(path)?;
    let loaded = load_csv(path, &schema)?;
    let mut data = loaded.dataset;
    let n = data.len();
    if n < 2 {
        return Err(CliError::Data(format!("{} has {n} rows, need at least 2", path.display())));
    }
    if !is_power(n) {
        if !cfg.auto_size {
            let fit = fit_power_size(&data, cfg.base, Subsample::Stride)?;
            return Err(CliError::usage(format!(
                "{n} rows is not a power n^d; rerun with --auto-size to train on {} rows ({}^{})",
                fit.dataset.len(),
                fit.base,
                fit.exponent
            )));
        }
        let how = cfg.subsample.unwrap_or(Subsample::Shuffle(cfg.seed));
        let fit = fit_power_size(&data, cfg.base, how)?;
        eprintln!("auto-size: using {} of {n} rows ({}^{})", fit.dataset.len(), fit.base, fit.exponent);
        data = fit.dataset;
    }
    Ok(Training { data, schema, encoder: loaded.encoder })
}

fn problem(cfg: &RunConfig, centered: &Dataset) -> Result<DualProblem> {
    Ok(DualProblem::from_dataset(centered, cfg.kernel, cfg.gamma, cfg.sigma_e2, cfg.sigma_r2)?)
}

/// Regression: RMSE, Fit and coverage. Classification: labeled and
/// confident percentages.
fn metrics(task: Task, y: &[f64], b: &Batch) -> Result<Vec<(&'static str, Option<f64>)>> {
    let yh = b.means();
    let sig = b.sigmas();
    Ok(match task {
        Task::Regression => vec![
            ("rmse", Some(metric_rmse(y, &yh)?)),
            ("fit_%", metric_fit(y, &yh)?),
            ("confidence_%", sig.map(|s| metric_confidence(y, &yh, &s)).transpose()?),
        ],
        Task::Classification => vec![
            ("labeled_%", Some(metric_labeled(y, &yh)?)),
            ("confidence_%", sig.map(|s| metric_confident_labels(y, &yh, &s)).transpose()?),
        ],
    })
}

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

pub fn train(s: &Settings) -> Result<()> {
    let cfg = RunConfig::from_settings(s)?;
    let model_path = cfg.require(&cfg.model, "model")?;
    let t = load_training(&cfg)?;
    let c = center(&t.data);
    let p = problem(&cfg, &c)?;
    let n = p.len();
    let step = (n / 10).max(1);
    let t0 = Instant::now();
    let run = train_with(&p, &cfg.filter, |st| {
        if st.k % step == 0 {
            let r = st.trace.last().expect("trace has the current step");
            eprintln!(
                "  row {}/{n}: |P|_F {:.3e}, ranks m {} P {}, {:.1}s",
                st.k,
                r.p_norm,
                r.max_rank_m,
                r.max_rank_p,
                t0.elapsed().as_secs_f64()
            );
        }
        ControlFlow::Continue(())
    });
    let run = match run {
        Err(e @ tnkf::Error::CovarianceCollapse { .. }) => {
            eprintln!(
                "hint: the covariance truncation eps_P / r_P ({:?}) is too loose; tighten it",
                cfg.filter.policies.p
            );
            return Err(e.into());
        }
        r => r?,
    };
    let secs = t0.elapsed().as_secs_f64();
    if let Some(trace) = &cfg.trace {
        let mut w = sink(Some(trace))?;
        writeln!(w, "{}", TraceRecord::CSV_HEADER)?;
        for r in &run.state.trace {
            writeln!(w, "{}", r.csv_line())?;
        }
        w.flush()?;
    }
    let (iterations, stop) = (run.state.k, run.stop);
    let last = run.state.trace.last().copied();
    let model = TrainedModel::from_filter(&p, run.state, c.centering.clone().expect("centered"), t.schema.task, cfg.policy_yt)?;
    save_model(&model, model_path, &cfg.inputs)?;
    let enc_path = encoder_path(model_path);
    if t.encoder != Encoder::default() {
        write_encoder(&t.encoder, &enc_path)?;
    } else if enc_path.exists() {
        fs::remove_file(&enc_path)?;
    }

    let stop = match stop {
        StopReason::AllRows => "all rows",
        StopReason::MaxIterations => "iteration limit",
        StopReason::EarlyStop => "early stop",
        StopReason::Callback => "interrupted",
    };
    let mut out = io::stdout().lock();
    writeln!(out, "rows          {n}")?;
    writeln!(out, "iterations    {iterations} ({stop})")?;
    if let Some(r) = last {
        writeln!(out, "|P|_F         {:.6e}", r.p_norm)?;
        writeln!(out, "max rank m    {}", r.max_rank_m)?;
        writeln!(out, "max rank P    {}", r.max_rank_p)?;
    }
    writeln!(out, "wall time     {secs:.2} s")?;
    if cfg.train_metrics {
        let b = model.predict_batch(&t.data.x)?;
        for (name, v) in metrics(model.task, &t.data.y, &b)? {
            writeln!(out, "train {name:<12} {}", show(v))?;
        }
    }
    writeln!(out, "model         {}", model_path.display())?;
    Ok(())
}

/// Loads a labeled test file for `model`, rejecting regression targets
/// given to a classifier.
fn load_test(cfg: &RunConfig, model: &TrainedModel, encoder: &Encoder, path: &Path) -> Result<Dataset> {
    let mut cfg = cfg.clone();
    cfg.task = model.task;
    let schema = cfg.schema(path)?;
    let d = if model.task == Task::Classification && encoder.label_values.is_none() {
        let numeric = CsvSchema { task: Task::Regression, ..schema };
        let d = load_csv_with(path, &numeric, encoder)?.dataset;
        if let Some(v) = d.y.iter().find(|v| **v != 1.0 && **v != -1.0) {
            return Err(CliError::usage(format!(
                "task mismatch: the model is a classifier but {} has target {v}; labels must be -1 or +1",
                path.display()
            )));
        }
        Dataset::new(d.x, d.y, Task::Classification, d.provenance)?
    } else {
        load_csv_with(path, &schema, encoder)?.dataset
    };
    if d.x.features() != model.features() {
        return Err(CliError::usage(format!(
            "{} has {} features, the model expects {}",
            path.display(),
            d.x.features(),
            model.features()
        )));
    }
    Ok(d)
}

pub fn predict(s: &Settings) -> Result<()> {
    let cfg = RunConfig::from_settings(s)?;
    let model_path = cfg.require(&cfg.model, "model")?;
    let data = cfg.require(&cfg.data, "data")?;
    let model = load_model(model_path)?;
    let encoder = read_encoder(&encoder_path(model_path))?;
    let d = load_test(&cfg, &model, &encoder, data)?;
    let t0 = Instant::now();
    let b = model.predict_batch(&d.x)?;
    let secs = t0.elapsed().as_secs_f64();
    let mut w = sink(cfg.out.as_deref())?;
    b.write_csv(&d.x, model.task, &mut w)?;
    w.flush()?;
    eprintln!("points        {}", d.len());
    for (name, v) in metrics(model.task, &d.y, &b)? {
        eprintln!("{name:<13} {}", show(v));
    }
    if b.clamped > 0 {
        eprintln!("clamped       {} negative variances set to zero", b.clamped);
    }
    eprintln!("wall time     {secs:.2} s");
    Ok(())
}

struct BenchRow {
    method: Method,
    outcome: std::result::Result<(Vec<(&'static str, Option<f64>)>, f64, usize), String>,
}

fn mib(entries: usize) -> f64 {
    entries as f64 * 8.0 / (1024.0 * 1024.0)
}

fn bench_one(
    method: Method,
    cfg: &RunConfig,
    p: &DualProblem,
    c: &Dataset,
    eval: &Dataset,
) -> Result<(Vec<(&'static str, Option<f64>)>, f64, usize)> {
    let t0 = Instant::now();
    let centering = c.centering.clone().expect("centered");
    let n = p.len();
    let (model, peak) = match method {
        Method::Tnkf => {
            let mut peak = 0;
            let run = train_with(p, &cfg.filter, |st| {
                peak = peak.max(st.storage());
                ControlFlow::Continue(())
            })?;
            (TrainedModel::from_filter(p, run.state, centering, c.task, cfg.policy_yt)?, peak)
        }
        Method::Nystrom => {
            let samples = cfg.samples.unwrap_or(n.min(4096));
            let nc = NystromConfig { samples, eigenpairs: cfg.eigenpairs.min(samples), seed: cfg.seed };
            let block = if samples * samples <= BLOCK_CACHE_ENTRIES { samples * samples } else { 0 };
            (nystrom_solve(p, &nc, centering, c.task)?, block + (n + samples) * nc.eigenpairs)
        }
        Method::Direct => {
            let alpha = solve_dense_direct(p)?;
            (TrainedModel::from_alpha(p, &alpha, centering, c.task)?, n * n)
        }
    };
    let b = model.predict_batch(&eval.x)?;
    Ok((metrics(c.task, &eval.y, &b)?, t0.elapsed().as_secs_f64(), peak))
}

pub fn bench(s: &Settings) -> Result<()> {
    let cfg = RunConfig::from_settings(s)?;
    let t = load_training(&cfg)?;
    let c = center(&t.data);
    let p = problem(&cfg, &c)?;
    let eval = match &cfg.test {
        Some(path) => {
            let probe = TrainedModel::from_alpha(&p, &vec![0.0; p.len()], c.centering.clone().expect("centered"), c.task)?;
            load_test(&cfg, &probe, &t.encoder, path)?
        }
        None => t.data.clone(),
    };
    let rows: Vec<BenchRow> = cfg
        .methods
        .iter()
        .map(|&method| {
            let outcome = if method == Method::Direct && p.len() > DENSE_CAP {
                Err(format!("skipped: N = {} exceeds the dense cap {DENSE_CAP}", p.len()))
            } else {
                bench_one(method, &cfg, &p, &c, &eval).map_err(|e| format!("failed: {e}"))
            };
            BenchRow { method, outcome }
        })
        .collect();

    let names: Vec<&str> = match c.task {
        Task::Regression => vec!["rmse", "fit_%", "confidence_%"],
        Task::Classification => vec!["labeled_%", "confidence_%"],
    };
    let mut out = io::stdout().lock();
    write!(out, "{:<9}", "method")?;
    for name in &names {
        write!(out, " {name:>13}")?;
    }
    writeln!(out, " {:>10} {:>10}", "time_s", "peak_MiB")?;
    for r in &rows {
        write!(out, "{:<9}", r.method.name())?;
        match &r.outcome {
            Ok((m, secs, peak)) => {
                for (_, v) in m {
                    write!(out, " {:>13}", show(*v))?;
                }
                writeln!(out, " {secs:>10.2} {:>10.2}", mib(*peak))?;
            }
            Err(msg) => writeln!(out, " {msg}")?,
        }
    }
    Ok(())
}

pub fn spectrum(a: &SpectrumArgs) -> Result<()> {
    let kernel = match a.kernel.to_ascii_lowercase().as_str() {
        "rbf" => KernelSpec::rbf(a.sigma2)?,
        "linear" => KernelSpec::Linear,
        k => return Err(CliError::usage(format!("unknown kernel `{k}` (rbf, linear)"))),
    };
    if let Some(&big) = a.sizes.iter().find(|&&n| n > DENSE_CAP) {
        return Err(tnkf::Error::ResourceLimit { what: "kernel matrix", requested: big * big, cap: DENSE_CAP * DENSE_CAP }.into());
    }
    let file = match &a.data {
        Some(path) => {
            let cols = RunConfig::from_settings(&Settings::default())?;
            let cfg = RunConfig { header: !a.no_header, ..cols };
            Some(load_csv(path, &cfg.schema(path)?)?.dataset.x)
        }
        None => None,
    };
    let make = |n: usize| -> tnkf::Result<Inputs> {
        match (&file, a.dataset) {
            (Some(x), _) => {
                if n > x.len() {
                    return Err(tnkf::Error::InvalidArgument(format!("size {n} exceeds the {} rows of the file", x.len())));
                }
                Ok(x.select(&(0..n).collect::<Vec<_>>()))
            }
            (None, DatasetKind::TwoSpiral) => Ok(gen_two_spiral_scaled(n, a.scale, 0.0, a.seed)?.x),
            (None, DatasetKind::Sinc) => Ok(gen_noisy_sinc(n, 0.0, a.seed)?.x),
        }
    };
    let spectra = eigen_spectrum(&kernel, &a.sizes, make)?;
    let mut w = sink(a.out.as_deref())?;
    writeln!(w, "size,index,eigenvalue")?;
    for (n, eigs) in &spectra {
        for (i, v) in eigs.iter().enumerate() {
            writeln!(w, "{n},{},{}", i + 1, tnkf::data::fmt_f64(*v))?;
        }
    }
    w.flush()?;
    for (n, eigs) in &spectra {
        eprintln!("size {n}: {} eigenvalues above {:e} * max", count_above(eigs, a.level), a.level);
    }
    Ok(())
}
