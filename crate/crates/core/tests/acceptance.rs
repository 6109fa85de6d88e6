//! End-to-end acceptance runs. Prints one PASS/FAIL line per criterion.
//!
//! Set `TNKF_ACCEPTANCE=1,2,6` to run a subset. A check listed as known
//! failing is reported as FAIL but does not fail the process; any other
//! failed check does.

mod common;

use std::fs;
use std::ops::ControlFlow;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use tnkf::baselines::{count_above, nystrom_solve, spectrum, NystromConfig};
use tnkf::data::{
    center, gen_noisy_sinc_on, gen_two_spiral_scaled, two_spiral_split, Dataset, Inputs, Task,
    SINC_REFERENCE_DOMAIN, SPIRAL_REFERENCE_SCALE,
};
use tnkf::dual::{posterior_dense, solve_dense_direct, DualProblem};
use tnkf::filter::{train, train_with, EarlyStop, FilterConfig, Policies, StopReason};
use tnkf::kernels::KernelSpec;
use tnkf::persist::{load_model, save_model, to_bytes, InputStorage};
use tnkf::predict::{
    metric_confidence, metric_confident_labels, metric_fit, metric_labeled, metric_rmse, TrainedModel,
};
use tnkf::tt::{TruncationPolicy as T, TtMatrix, TtVector};

struct Check {
    label: String,
    pass: bool,
    known: Option<&'static str>,
}

impl Check {
    fn new(pass: bool, label: impl Into<String>) -> Self {
        Check { label: label.into(), pass, known: None }
    }

    fn known(mut self, why: &'static str) -> Self {
        self.known = Some(why);
        self
    }
}

struct Report {
    id: u8,
    title: &'static str,
    checks: Vec<Check>,
    secs: f64,
}

impl Report {
    fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn unexpected(&self) -> bool {
        self.checks.iter().any(|c| !c.pass && c.known.is_none())
    }

    fn line(&self) -> String {
        let mut said = None;
        let parts: Vec<String> = self
            .checks
            .iter()
            .map(|c| match (c.pass, c.known) {
                (true, _) => c.label.clone(),
                (false, None) => format!("FAILED {}", c.label),
                (false, Some(why)) if said == Some(why) => format!("FAILED {}", c.label),
                (false, Some(why)) => {
                    said = Some(why);
                    format!("FAILED {} (known: {why})", c.label)
                }
            })
            .collect();
        format!(
            "criterion {} {:<22} {}  [{:.0}s] {}",
            self.id,
            self.title,
            if self.pass() { "PASS" } else { "FAIL" },
            self.secs,
            parts.join("; ")
        )
    }
}

fn sinc_problem(d: &Dataset) -> DualProblem {
    DualProblem::from_dataset(d, KernelSpec::Rbf { sigma2: 0.005 }, 0.005, Some(0.01), 0.01).unwrap()
}

/// Truncations of the reference sinc runs; the mean is kept exact.
fn sinc_filter() -> FilterConfig {
    FilterConfig {
        policies: Policies {
            m: T::Exact,
            c: T::RelativeError(0.001),
            p: T::RelativeError(0.0005),
            k: T::RelativeError(0.2),
        },
        ..Default::default()
    }
}

fn random_problem(seed: u64, n: usize) -> DualProblem {
    let mut g = rng(seed);
    let f = g.random_range(1..=3);
    let x = Inputs::new(n, f, random_vec(&mut g, n * f)).unwrap();
    let y = random_vec(&mut g, n);
    let sigma2 = g.random_range(0.3..1.7);
    let gamma = g.random_range(1.0..9.0);
    let sigma_r2 = g.random_range(0.05..0.45);
    DualProblem::new(x, y, KernelSpec::Rbf { sigma2 }, gamma, Some(0.5), sigma_r2).unwrap()
}

fn oracle_equivalence() -> Vec<Check> {
    let t0 = Instant::now();
    let sizes = [8, 16, 27, 64];
    let (mut worst_m, mut worst_p) = (0.0f64, 0.0f64);
    for i in 0..20u64 {
        let p = random_problem(1000 + i, sizes[i as usize % 4]);
        let run = train(&p, &FilterConfig::default()).unwrap();
        let (m, cov) = posterior_dense(&p).unwrap();
        let cov: Vec<f64> = (0..cov.nrows()).flat_map(|r| (0..cov.ncols()).map(move |c| (r, c))).map(|(r, c)| cov[(r, c)]).collect();
        worst_m = worst_m.max(rel_err(&run.state.m.full().unwrap(), &m));
        worst_p = worst_p.max(rel_err(&run.state.p.full().unwrap(), &cov));
    }
    let secs = t0.elapsed().as_secs_f64();
    vec![
        Check::new(worst_m <= 1e-6, format!("mean rel err {worst_m:.1e}")),
        Check::new(worst_p <= 1e-5, format!("covariance rel err {worst_p:.1e}")),
        Check::new(secs < 60.0, format!("{secs:.1}s")),
    ]
}

fn tt_error_bounds() -> Vec<Check> {
    let t0 = Instant::now();
    let mut g = rng(77);
    let (mut svd_ok, mut round_ok, mut algebra_ok) = (true, true, true);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let order = 3 + i % 4;
        let dims: Vec<usize> = (0..order).map(|_| g.random_range(2..=5)).collect();
        let n: usize = dims.iter().product();
        let x = random_vec(&mut g, n);
        let interior: Vec<usize> = (1..order).map(|_| g.random_range(1..=4)).collect();
        let a = random_tt(&mut g, &dims, &interior);
        let a_dense = a.full().unwrap();
        for eps in [1e-1, 1e-2, 1e-6] {
            let svd = TtVector::from_dense(&x, &dims, T::RelativeError(eps)).unwrap();
            let e = diff_norm(&svd.full().unwrap(), &x) / norm(&x);
            svd_ok &= e <= eps * (1.0 + 1e-10);
            let r = a.round(T::RelativeError(eps)).unwrap();
            let e2 = diff_norm(&r.full().unwrap(), &a_dense) / norm(&a_dense);
            round_ok &= e2 <= eps * (1.0 + 1e-10);
            worst = worst.max(e / eps).max(e2 / eps);
        }

        let b_int: Vec<usize> = (1..order).map(|_| g.random_range(1..=3)).collect();
        let b = random_tt(&mut g, &dims, &b_int);
        let m = random_tt_matrix(&mut g, &dims, &dims, &b_int);
        let interior_of = |r: Vec<usize>| r[1..r.len() - 1].to_vec();
        let sum: Vec<usize> = interior.iter().zip(&b_int).map(|(p, q)| p + q).collect();
        let prod: Vec<usize> = interior.iter().zip(&b_int).map(|(p, q)| p * q).collect();
        let sq: Vec<usize> = b_int.iter().map(|q| q * q).collect();
        algebra_ok &= interior_of(a.add(&b).unwrap().ranks()) == sum;
        algebra_ok &= interior_of(m.matvec(&a).unwrap().ranks()) == prod;
        algebra_ok &= interior_of(m.matmul(&m).unwrap().ranks()) == sq;
        algebra_ok &= interior_of(TtMatrix::outer(&a, &b).unwrap().ranks()) == prod;
    }
    let secs = t0.elapsed().as_secs_f64();
    vec![
        Check::new(svd_ok, "TT-SVD within bound"),
        Check::new(round_ok, format!("rounding within bound (worst err/eps {worst:.2})")),
        Check::new(algebra_ok, "rank algebra exact"),
        Check::new(secs < 60.0, format!("{secs:.1}s")),
    ]
}

struct SincRun {
    seed: u64,
    rmse: f64,
    fit: f64,
    coverage: f64,
    nystrom_rmse: f64,
    secs: f64,
}

fn sinc_run(seed: u64) -> SincRun {
    let t0 = Instant::now();
    let train_set = gen_noisy_sinc_on(1 << 14, 0.1, seed, SINC_REFERENCE_DOMAIN).unwrap();
    let test = gen_noisy_sinc_on(1 << 13, 0.1, seed + 1000, SINC_REFERENCE_DOMAIN).unwrap();
    let c = center(&train_set);
    let p = sinc_problem(&c);
    let run = train(&p, &sinc_filter()).unwrap();
    let model = TrainedModel::from_filter(&p, run.state, c.centering.clone().unwrap(), Task::Regression, T::RelativeError(0.001)).unwrap();
    let b = model.predict_batch(&test.x).unwrap();
    let (yh, sg) = (b.means(), b.sigmas().unwrap());
    let nys_cfg = NystromConfig { samples: 1 << 14, eigenpairs: 50, seed };
    let nys = nystrom_solve(&p, &nys_cfg, c.centering.clone().unwrap(), Task::Regression).unwrap();
    let nyh = nys.predict_batch(&test.x).unwrap().means();
    let r = SincRun {
        seed,
        rmse: metric_rmse(&test.y, &yh).unwrap(),
        fit: metric_fit(&test.y, &yh).unwrap().unwrap(),
        coverage: metric_confidence(&test.y, &yh, &sg).unwrap(),
        nystrom_rmse: metric_rmse(&test.y, &nyh).unwrap(),
        secs: t0.elapsed().as_secs_f64(),
    };
    eprintln!(
        "  sinc seed {}: rmse {:.4} fit {:.2} coverage {:.2}% nystrom {:.4} ({:.0}s)",
        r.seed, r.rmse, r.fit, r.coverage, r.nystrom_rmse, r.secs
    );
    r
}

const FAST_VARIANT: &str = "with gamma = 0.005 the exact LS-SVM solution on 2^12 points is itself above 0.13";

fn sinc_fast_variant() -> Vec<Check> {
    let train_set = gen_noisy_sinc_on(1 << 12, 0.1, 1, SINC_REFERENCE_DOMAIN).unwrap();
    let test = gen_noisy_sinc_on(1 << 13, 0.1, 1001, SINC_REFERENCE_DOMAIN).unwrap();
    let c = center(&train_set);
    let p = sinc_problem(&c);
    let run = train(&p, &sinc_filter()).unwrap();
    let model = TrainedModel::from_filter(&p, run.state, c.centering.clone().unwrap(), Task::Regression, T::RelativeError(0.001)).unwrap();
    let rmse = metric_rmse(&test.y, &model.predict_batch(&test.x).unwrap().means()).unwrap();
    let alpha = solve_dense_direct(&p).unwrap();
    let direct = TrainedModel::from_alpha(&p, &alpha, c.centering.clone().unwrap(), Task::Regression).unwrap();
    let direct_rmse = metric_rmse(&test.y, &direct.predict_batch(&test.x).unwrap().means()).unwrap();
    vec![Check::new(rmse <= 0.13, format!("2^12 rmse {rmse:.4} (exact solution {direct_rmse:.4})")).known(FAST_VARIANT)]
}

fn two_spiral() -> Vec<Check> {
    let t0 = Instant::now();
    let (tr, te) = two_spiral_split(1 << 14, SPIRAL_REFERENCE_SCALE, 1).unwrap();
    let c = center(&tr);
    let p = DualProblem::from_dataset(&c, KernelSpec::Rbf { sigma2: 5e-8 }, 0.05, None, 1e-5).unwrap();
    let cfg = FilterConfig { policies: Policies::uniform(T::MaxRank(1)), ..Default::default() };
    let run = train(&p, &cfg).unwrap();
    let model = TrainedModel::from_filter(&p, run.state, c.centering.clone().unwrap(), Task::Classification, T::MaxRank(1)).unwrap();
    let b = model.predict_batch(&te.x).unwrap();
    let (yh, sg) = (b.means(), b.sigmas().unwrap());
    let labeled = metric_labeled(&te.y, &yh).unwrap();
    let confident = metric_confident_labels(&te.y, &yh, &sg).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    vec![
        Check::new(labeled == 100.0, format!("{labeled:.2}% of {} test points labeled", te.len())),
        Check::new(confident == 100.0, format!("{confident:.2}% confident")),
        Check::new(secs < 1800.0, format!("{secs:.0}s")),
    ]
}

fn spectrum_plateau() -> Vec<Check> {
    let t0 = Instant::now();
    let kernel = KernelSpec::Rbf { sigma2: 5e-8 };
    let spectra = spectrum(&kernel, &[256, 512, 1024], |n| Ok(gen_two_spiral_scaled(n, SPIRAL_REFERENCE_SCALE, 0.0, 1)?.x)).unwrap();
    let counts: Vec<usize> = spectra.iter().map(|(_, e)| count_above(e, 1e-3)).collect();
    let secs = t0.elapsed().as_secs_f64();
    vec![
        Check::new(counts.windows(2).all(|w| w[0] < w[1]), format!("counts {counts:?}")),
        Check::new(secs < 60.0, format!("{secs:.1}s")),
    ]
}

/// Classification data whose boundary `x0² + x1 = 1` is curved.
fn synthetic_classes(n: usize, f: usize, seed: u64) -> Dataset {
    let mut g = rng(seed);
    let mut x = Vec::with_capacity(n * f);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let p: Vec<f64> = (0..f).map(|_| StandardNormal.sample(&mut g)).collect();
        let noise: f64 = StandardNormal.sample(&mut g);
        y.push(if p[0] * p[0] + p[1] - 1.0 + 0.3 * noise > 0.0 { 1.0 } else { -1.0 });
        x.extend(p);
    }
    Dataset::new(Inputs::new(n, f, x).unwrap(), y, Task::Classification, "synthetic").unwrap()
}

struct EarlyRun {
    summary: String,
    rows: usize,
    stopped_early: bool,
    accuracy: Option<f64>,
}

fn early_stop_run(train_set: &Dataset, test: &Dataset, early: bool) -> EarlyRun {
    let c = center(train_set);
    let gamma = 0.0015;
    // Unit prior covariance: σe² = 1/γ².
    let p = DualProblem::from_dataset(&c, KernelSpec::Rbf { sigma2: 0.5 }, gamma, Some(1.0 / (gamma * gamma)), 1e-8).unwrap();
    let cfg = FilterConfig {
        lambda: 1.0 / 1.9975,
        policies: Policies { m: T::RelativeError(0.001), c: T::MaxRank(30), p: T::RelativeError(0.001), k: T::MaxRank(6) },
        early_stop: early.then_some(EarlyStop { p_norm_threshold: 1e-5, p_norm_delta_threshold: 5e-3, patience: 5 }),
        ..Default::default()
    };
    let mut rows = 0;
    let mut norms = Vec::new();
    let res = train_with(&p, &cfg, |st| {
        rows = st.k;
        if [1, 10, 100, 500].contains(&st.k) {
            norms.push(format!("{}:{:.1e}", st.k, st.trace.last().unwrap().p_norm));
        }
        ControlFlow::Continue(())
    });
    match res {
        Ok(run) => {
            let rows = run.state.k;
            let stopped_early = run.stop == StopReason::EarlyStop;
            let model = TrainedModel::from_filter(&p, run.state, c.centering.clone().unwrap(), Task::Classification, T::RelativeError(0.001)).unwrap();
            let acc = metric_labeled(&test.y, &model.predict_batch(&test.x).unwrap().means()).unwrap();
            EarlyRun { summary: format!("{rows} rows, {acc:.1}% labeled"), rows, stopped_early, accuracy: Some(acc) }
        }
        Err(e) => EarlyRun {
            summary: format!("diverged after {rows} rows, |P| {} ({e})", norms.join(" ")),
            rows,
            stopped_early: false,
            accuracy: None,
        },
    }
}

const EARLY_STOP: &str = "for lambda < 1 every unobserved direction of P grows as lambda^-k, so |P| never reaches 1e-5 and a full pass overflows";

fn early_stopping() -> Vec<Check> {
    let n = 6561;
    let tr = synthetic_classes(n, 4, 1);
    let te = synthetic_classes(2000, 4, 2);
    let early = early_stop_run(&tr, &te, true);
    let full = early_stop_run(&tr, &te, false);
    let close = match (early.accuracy, full.accuracy) {
        (Some(a), Some(b)) => (a - b).abs() <= 5.0,
        _ => false,
    };
    vec![
        Check::new(early.stopped_early && early.rows < n, format!("early-stop run: {}", early.summary)).known(EARLY_STOP),
        Check::new(close, format!("full pass: {}", full.summary)).known(EARLY_STOP),
    ]
}

fn scratch() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("tnkf-acceptance-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

/// Trains a small reference model from scratch; returns it with its
/// serialized bytes and the predictions CSV on a fixed test set.
fn pipeline(seed: u64) -> (TrainedModel, Vec<u8>, Vec<u8>) {
    let tr = gen_noisy_sinc_on(1 << 10, 0.1, seed, SINC_REFERENCE_DOMAIN).unwrap();
    let c = center(&tr);
    let p = sinc_problem(&c);
    let run = train(&p, &sinc_filter()).unwrap();
    let model = TrainedModel::from_filter(&p, run.state, c.centering.clone().unwrap(), Task::Regression, T::RelativeError(0.001)).unwrap();
    let bytes = to_bytes(&model).unwrap();
    let csv = predictions(&model);
    (model, bytes, csv)
}

fn predictions(model: &TrainedModel) -> Vec<u8> {
    let test = gen_noisy_sinc_on(500, 0.1, 9, SINC_REFERENCE_DOMAIN).unwrap();
    let mut out = Vec::new();
    model.predict_batch(&test.x).unwrap().write_csv(&test.x, model.task, &mut out).unwrap();
    out
}

fn nystrom_csv(seed: u64) -> Vec<u8> {
    let c = center(&gen_noisy_sinc_on(1 << 10, 0.1, 3, SINC_REFERENCE_DOMAIN).unwrap());
    let p = sinc_problem(&c);
    let model = nystrom_solve(&p, &NystromConfig { samples: 256, eigenpairs: 40, seed }, c.centering.clone().unwrap(), Task::Regression).unwrap();
    predictions(&model)
}

fn determinism() -> Vec<Check> {
    let dir = scratch();
    let (model, bytes, csv) = pipeline(5);
    let (_, bytes2, csv2) = pipeline(5);
    let inline = dir.join("inline.tnkf");
    save_model(&model, &inline, &InputStorage::Inline).unwrap();
    let from_inline = predictions(&load_model(&inline).unwrap());
    let referenced = dir.join("referenced.tnkf");
    save_model(&model, &referenced, &InputStorage::Reference("inputs.csv".into())).unwrap();
    let from_reference = predictions(&load_model(&referenced).unwrap());
    let nys_same = nystrom_csv(11) == nystrom_csv(11);
    fs::remove_dir_all(&dir).ok();
    vec![
        Check::new(from_inline == csv, "inline save/load/predict identical"),
        Check::new(from_reference == csv, "referenced save/load/predict identical"),
        Check::new(bytes == bytes2 && csv == csv2, "repeated training identical"),
        Check::new(nys_same, "repeated Nystrom identical"),
    ]
}

fn sinc_reports(reports: &mut Vec<Report>, wanted: &dyn Fn(u8) -> bool) {
    if !(wanted(3) || wanted(4) || wanted(7)) {
        return;
    }
    let t0 = Instant::now();
    let runs: Vec<SincRun> = (1..=3).map(sinc_run).collect();
    let shared = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let mut c3: Vec<Check> = runs
        .iter()
        .map(|r| {
            Check::new(
                (0.095..=0.125).contains(&r.rmse) && r.fit >= 70.0,
                format!("seed {} rmse {:.4} fit {:.2}", r.seed, r.rmse, r.fit),
            )
        })
        .collect();
    c3.extend(sinc_fast_variant());
    let fast = t1.elapsed().as_secs_f64();

    let c4 = runs
        .iter()
        .map(|r| {
            Check::new(
                (0.12..=0.20).contains(&r.nystrom_rmse) && r.nystrom_rmse > r.rmse,
                format!("seed {} nystrom {:.4} vs {:.4}", r.seed, r.nystrom_rmse, r.rmse),
            )
        })
        .collect();
    let c7 = runs
        .iter()
        .map(|r| Check::new(r.coverage >= 99.0, format!("seed {} {:.2}% inside", r.seed, r.coverage)))
        .collect();
    reports.push(Report { id: 3, title: "noisy sinc", checks: c3, secs: shared + fast });
    reports.push(Report { id: 4, title: "nystrom baseline", checks: c4, secs: shared });
    reports.push(Report { id: 7, title: "confidence coverage", checks: c7, secs: shared });
}

fn main() -> ExitCode {
    let only: Option<Vec<u8>> = std::env::var("TNKF_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |id: u8| only.as_ref().is_none_or(|o| o.contains(&id));

    type Run = fn() -> Vec<Check>;
    let quick: [(u8, &str, Run); 5] = [
        (1, "oracle equivalence", oracle_equivalence),
        (2, "tt error bounds", tt_error_bounds),
        (6, "spectrum plateau", spectrum_plateau),
        (9, "determinism", determinism),
        (8, "early stopping", early_stopping),
    ];
    let mut reports = Vec::new();
    for (id, title, f) in quick {
        if wanted(id) {
            let t0 = Instant::now();
            let checks = f();
            reports.push(Report { id, title, checks, secs: t0.elapsed().as_secs_f64() });
            eprintln!("{}", reports.last().unwrap().line());
        }
    }
    if wanted(5) {
        let t0 = Instant::now();
        let checks = two_spiral();
        reports.push(Report { id: 5, title: "two-spiral", checks, secs: t0.elapsed().as_secs_f64() });
        eprintln!("{}", reports.last().unwrap().line());
    }
    sinc_reports(&mut reports, &wanted);

    reports.sort_by_key(|r| r.id);
    println!();
    for r in &reports {
        println!("{}", r.line());
    }
    let passed = reports.iter().filter(|r| r.pass()).count();
    println!("{passed}/{} criteria passed", reports.len());
    if reports.iter().any(Report::unexpected) {
        println!("unexpected failures");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
