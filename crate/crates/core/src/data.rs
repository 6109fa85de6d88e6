//! Datasets: synthetic generators, CSV ingestion, centering and
//! power-of-`n` subsampling.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::{Error, Result};

/// Row-major `N × f` feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Inputs {
    n: usize,
    f: usize,
    data: Vec<f64>,
}

impl Inputs {
    pub fn new(n: usize, f: usize, data: Vec<f64>) -> Result<Self> {
        if f == 0 {
            return Err(Error::invalid("inputs need at least one feature"));
        }
        if data.len() != n * f {
            return Err(Error::invalid(format!(
                "{n} points with {f} features need {} values, got {}",
                n * f,
                data.len()
            )));
        }
        Ok(Inputs { n, f, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let f = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != f) {
            return Err(Error::invalid("rows have different lengths"));
        }
        Self::new(rows.len(), f, rows.concat())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn features(&self) -> usize {
        self.f
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.f..(i + 1) * self.f]
    }

    pub fn rows(&self) -> std::slice::Chunks<'_, f64> {
        self.data.chunks(self.f)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.f);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Inputs { n: idx.len(), f: self.f, data }
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.f];
        if self.n == 0 {
            return m;
        }
        for row in self.rows() {
            for (acc, v) in m.iter_mut().zip(row) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.n as f64);
        m
    }

    fn shift(&mut self, by: &[f64], sign: f64) {
        for row in self.data.chunks_mut(self.f) {
            for (v, m) in row.iter_mut().zip(by) {
                *v += sign * m;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Regression,
    Classification,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Regression => "regression",
            Task::Classification => "classification",
        }
    }
}

/// Means removed by [`center`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Centering {
    pub y_mean: f64,
    pub x_means: Vec<f64>,
}

impl Centering {
    /// Applies the stored feature shift to one test point.
    pub fn center_point(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.x_means).map(|(v, m)| v - m).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Inputs,
    pub y: Vec<f64>,
    pub task: Task,
    pub centering: Option<Centering>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(x: Inputs, y: Vec<f64>, task: Task, provenance: impl Into<String>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::invalid(format!(
                "{} inputs but {} targets",
                x.len(),
                y.len()
            )));
        }
        if task == Task::Classification && y.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::invalid("classification labels must be -1 or +1"));
        }
        Ok(Dataset {
            x,
            y,
            task,
            centering: None,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Dataset {
            x: self.x.select(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            task: self.task,
            centering: self.centering.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Writes `x1,…,xf,y` with a header, full round-trip precision.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let header: Vec<String> = (1..=self.x.features())
            .map(|j| format!("x{j}"))
            .chain(std::iter::once("y".to_string()))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (row, y) in self.x.rows().zip(&self.y) {
            let mut line = String::new();
            for v in row {
                line.push_str(&fmt_f64(*v));
                line.push(',');
            }
            line.push_str(&fmt_f64(*y));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Shortest decimal that round-trips to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Normalized sinc, `sin(πx)/(πx)` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Default sinc input interval.
pub const SINC_DOMAIN: (f64, f64) = (-5.0, 5.0);

/// Interval of the reference sinc experiments. At `γ = 0.005` the wider
/// default is too sparse and the fit is dominated by regularization.
pub const SINC_REFERENCE_DOMAIN: (f64, f64) = (-1.5, 1.5);

/// `n` evenly spaced points on [`SINC_DOMAIN`] with `y = sinc(x) + e`.
pub fn gen_noisy_sinc(n: usize, noise_sigma: f64, seed: u64) -> Result<Dataset> {
    gen_noisy_sinc_on(n, noise_sigma, seed, SINC_DOMAIN)
}

/// [`gen_noisy_sinc`] on a chosen interval `[lo, hi]`.
pub fn gen_noisy_sinc_on(n: usize, noise_sigma: f64, seed: u64, domain: (f64, f64)) -> Result<Dataset> {
    let (lo, hi) = domain;
    if n == 0 {
        return Err(Error::invalid("sinc needs at least one point"));
    }
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(Error::invalid(format!("noise sigma must be >= 0, got {noise_sigma}")));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(format!("invalid sinc domain [{lo}, {hi}]")));
    }
    let xs: Vec<f64> = if n == 1 {
        vec![0.5 * (lo + hi)]
    } else {
        let h = (hi - lo) / (n - 1) as f64;
        (0..n).map(|i| lo + h * i as f64).collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sigma).expect("finite sigma");
    let y = xs
        .iter()
        .map(|&x| {
            let e = if noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            sinc(x) + e
        })
        .collect();
    Dataset::new(
        Inputs::new(n, 1, xs)?,
        y,
        Task::Regression,
        format!("sinc n={n} noise={noise_sigma} seed={seed} domain=[{lo},{hi}]"),
    )
}

/// Spiral parameter range `t ∈ [π/2, 7π]`.
pub const SPIRAL_T: (f64, f64) = (PI / 2.0, 7.0 * PI);

/// Coordinate scale at which `σ² = 5e-8` is comparable to the spacing of a
/// 2^14-point spiral; unscaled, that kernel is numerically the identity.
pub const SPIRAL_REFERENCE_SCALE: f64 = 2.4e-3;

/// Two interleaved spirals, `N/2` points each: class `+1` at
/// `(t cos t, t sin t)`, class `−1` at `(t cos(t+π), t sin(t+π))`.
/// Points are ordered by class, then by `t`.
pub fn gen_two_spiral(n: usize, seed: u64) -> Result<Dataset> {
    gen_two_spiral_scaled(n, 1.0, 0.0, seed)
}

/// [`gen_two_spiral`] with coordinates multiplied by `scale` and optional
/// Gaussian jitter of standard deviation `jitter` (in scaled units).
pub fn gen_two_spiral_scaled(n: usize, scale: f64, jitter: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::invalid(format!("two-spiral needs a positive even N, got {n}")));
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::invalid(format!("spiral scale must be positive, got {scale}")));
    }
    if !(jitter >= 0.0) || !jitter.is_finite() {
        return Err(Error::invalid(format!("spiral jitter must be >= 0, got {jitter}")));
    }
    let half = n / 2;
    let (t0, t1) = SPIRAL_T;
    let ts: Vec<f64> = if half == 1 {
        vec![t0]
    } else {
        (0..half).map(|i| t0 + (t1 - t0) * i as f64 / (half - 1) as f64).collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, jitter.max(f64::MIN_POSITIVE)).expect("finite jitter");
    let mut data = Vec::with_capacity(2 * n);
    let mut y = Vec::with_capacity(n);
    for (label, phase) in [(1.0, 0.0), (-1.0, PI)] {
        for &t in &ts {
            let mut p = [scale * t * (t + phase).cos(), scale * t * (t + phase).sin()];
            if jitter > 0.0 {
                p.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
            }
            data.extend_from_slice(&p);
            y.push(label);
        }
    }
    Dataset::new(
        Inputs::new(n, 2, data)?,
        y,
        Task::Classification,
        format!("two-spiral n={n} scale={scale} jitter={jitter} seed={seed}"),
    )
}

/// Splits off every fourth point (indices `3, 7, 11, …`) as the test set.
pub fn every_fourth_split(d: &Dataset) -> (Dataset, Dataset) {
    let (test, train): (Vec<usize>, Vec<usize>) = (0..d.len()).partition(|i| i % 4 == 3);
    (d.select(&train), d.select(&test))
}

/// Two-spiral train/test pair with exactly `n_train` training points
/// (ordered by class) and every fourth generated point held out.
pub fn two_spiral_split(n_train: usize, scale: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if n_train == 0 || n_train % 2 != 0 {
        return Err(Error::invalid(format!("n_train must be positive and even, got {n_train}")));
    }
    // Each class contributes n_train/2 training points; per class, three of
    // every four generated points are kept.
    let per_class_train = n_train / 2;
    let per_class = (per_class_train * 4).div_ceil(3);
    let full = gen_two_spiral_scaled(2 * per_class, scale, 0.0, seed)?;
    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::new();
    for class in 0..2 {
        let base = class * per_class;
        let mut kept = 0;
        for i in 0..per_class {
            if i % 4 == 3 {
                test.push(base + i);
            } else if kept < per_class_train {
                train.push(base + i);
                kept += 1;
            }
        }
    }
    Ok((full.select(&train), full.select(&test)))
}

/// Role of one CSV column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnRole {
    Numeric,
    Categorical,
    Label,
    Ignore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub roles: Vec<ColumnRole>,
    pub has_header: bool,
    pub task: Task,
}

impl CsvSchema {
    /// All columns numeric except the last, which is the label.
    pub fn numeric(columns: usize, has_header: bool, task: Task) -> Self {
        let mut roles = vec![ColumnRole::Numeric; columns.saturating_sub(1)];
        roles.push(ColumnRole::Label);
        CsvSchema { roles, has_header, task }
    }

    /// Parses a compact role string such as `nncnl`: `n` numeric,
    /// `c` categorical, `l` label, `-` ignored.
    pub fn parse_roles(s: &str, has_header: bool, task: Task) -> Result<Self> {
        let roles = s
            .chars()
            .filter(|c| !c.is_whitespace() && *c != ',')
            .map(|c| match c {
                'n' => Ok(ColumnRole::Numeric),
                'c' => Ok(ColumnRole::Categorical),
                'l' => Ok(ColumnRole::Label),
                '-' => Ok(ColumnRole::Ignore),
                other => Err(Error::invalid(format!("unknown column role '{other}'"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let schema = CsvSchema { roles, has_header, task };
        schema.validate()?;
        Ok(schema)
    }

    fn validate(&self) -> Result<()> {
        let labels = self.roles.iter().filter(|r| **r == ColumnRole::Label).count();
        if labels != 1 {
            return Err(Error::invalid(format!("schema needs exactly one label column, has {labels}")));
        }
        if !self
            .roles
            .iter()
            .any(|r| matches!(r, ColumnRole::Numeric | ColumnRole::Categorical))
        {
            return Err(Error::invalid("schema has no feature columns"));
        }
        Ok(())
    }
}

/// Category vocabularies and label mapping learned from a training file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Encoder {
    /// Sorted categories for each categorical column, in column order.
    pub categories: Vec<Vec<String>>,
    /// For classification with non-numeric labels: the values mapped to
    /// `−1` and `+1`.
    pub label_values: Option<[String; 2]>,
}

impl Encoder {
    pub fn encoded_features(&self, schema: &CsvSchema) -> usize {
        let numeric = schema.roles.iter().filter(|r| **r == ColumnRole::Numeric).count();
        numeric + self.categories.iter().map(Vec::len).sum::<usize>()
    }
}

/// Result of [`load_csv`]: the data, the fitted encoder and the number of
/// categorical values not seen in the encoder (encoded as all zeros).
#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: Dataset,
    pub encoder: Encoder,
    pub unknown_categories: usize,
}

fn read_records(path: &Path, schema: &CsvSchema) -> Result<Vec<(usize, csv::StringRecord)>> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != schema.roles.len() {
            return Err(Error::Data {
                line,
                message: format!("expected {} fields, found {}", schema.roles.len(), rec.len()),
            });
        }
        out.push((line, rec));
    }
    Ok(out)
}

/// Loads a CSV file, learning category vocabularies from it.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Loaded> {
    let records = read_records(path, schema)?;
    let mut vocab: Vec<Vec<String>> = Vec::new();
    let mut label_strings: Vec<String> = Vec::new();
    for (j, role) in schema.roles.iter().enumerate() {
        match role {
            ColumnRole::Categorical => {
                let mut v: Vec<String> = records.iter().map(|(_, r)| r[j].to_string()).collect();
                v.sort();
                v.dedup();
                vocab.push(v);
            }
            ColumnRole::Label if schema.task == Task::Classification => {
                let all_numeric_pm1 = records
                    .iter()
                    .all(|(_, r)| matches!(r[j].parse::<f64>(), Ok(v) if v == 1.0 || v == -1.0));
                if !all_numeric_pm1 {
                    let mut v: Vec<String> = records.iter().map(|(_, r)| r[j].to_string()).collect();
                    v.sort();
                    v.dedup();
                    label_strings = v;
                }
            }
            _ => {}
        }
    }
    let label_values = match label_strings.len() {
        0 => None,
        2 => Some([label_strings[0].clone(), label_strings[1].clone()]),
        k => {
            return Err(Error::Data {
                line: 0,
                message: format!("classification label column has {k} distinct values, need 2"),
            })
        }
    };
    let encoder = Encoder { categories: vocab, label_values };
    encode(&records, schema, encoder, path)
}

/// Loads a CSV file with a previously fitted encoder (test data).
pub fn load_csv_with(path: &Path, schema: &CsvSchema, encoder: &Encoder) -> Result<Loaded> {
    let records = read_records(path, schema)?;
    encode(&records, schema, encoder.clone(), path)
}

fn encode(
    records: &[(usize, csv::StringRecord)],
    schema: &CsvSchema,
    encoder: Encoder,
    path: &Path,
) -> Result<Loaded> {
    let f = encoder.encoded_features(schema);
    let mut data = Vec::with_capacity(records.len() * f);
    let mut y = Vec::with_capacity(records.len());
    let mut unknown = 0;
    let lookup: Vec<BTreeMap<&str, usize>> = encoder
        .categories
        .iter()
        .map(|c| c.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect())
        .collect();
    for (line, rec) in records {
        let line = *line;
        let mut cat = 0;
        for (j, role) in schema.roles.iter().enumerate() {
            let field = &rec[j];
            match role {
                ColumnRole::Numeric => data.push(parse_num(field, line, j)?),
                ColumnRole::Categorical => {
                    let k = encoder.categories[cat].len();
                    let start = data.len();
                    data.resize(start + k, 0.0);
                    match lookup[cat].get(field) {
                        Some(&i) => data[start + i] = 1.0,
                        None => unknown += 1,
                    }
                    cat += 1;
                }
                ColumnRole::Label => y.push(parse_label(field, line, j, schema.task, &encoder)?),
                ColumnRole::Ignore => {}
            }
        }
    }
    let n = y.len();
    let dataset = Dataset::new(Inputs::new(n, f, data)?, y, schema.task, path.display().to_string())?;
    Ok(Loaded {
        dataset,
        encoder,
        unknown_categories: unknown,
    })
}

fn parse_num(field: &str, line: usize, col: usize) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Data {
            line,
            message: format!("column {}: '{field}' is not a finite number", col + 1),
        }),
    }
}

fn parse_label(field: &str, line: usize, col: usize, task: Task, enc: &Encoder) -> Result<f64> {
    if task == Task::Regression {
        return parse_num(field, line, col);
    }
    if let Some([neg, pos]) = &enc.label_values {
        return if field == neg {
            Ok(-1.0)
        } else if field == pos {
            Ok(1.0)
        } else {
            Err(Error::Data {
                line,
                message: format!("unknown class label '{field}'"),
            })
        };
    }
    match field.parse::<f64>() {
        Ok(v) if v == 1.0 || v == -1.0 => Ok(v),
        _ => Err(Error::Data {
            line,
            message: format!("class label '{field}' is not -1 or +1"),
        }),
    }
}

/// Subtracts feature means and, for regression, the target mean.
pub fn center(d: &Dataset) -> Dataset {
    let x_means = d.x.column_means();
    let y_mean = match d.task {
        Task::Regression if !d.y.is_empty() => d.y.iter().sum::<f64>() / d.len() as f64,
        _ => 0.0,
    };
    let mut out = d.clone();
    out.x.shift(&x_means, -1.0);
    out.y.iter_mut().for_each(|v| *v -= y_mean);
    out.centering = Some(Centering { y_mean, x_means });
    out
}

/// Inverse of [`center`]; a dataset without a centering record is returned
/// unchanged.
pub fn uncenter(d: &Dataset) -> Dataset {
    let mut out = d.clone();
    if let Some(c) = out.centering.take() {
        out.x.shift(&c.x_means, 1.0);
        out.y.iter_mut().for_each(|v| *v += c.y_mean);
    }
    out
}

/// How [`fit_power_size`] picks the rows it keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsample {
    /// Seeded shuffle, then the first rows; for i.i.d. sources.
    Shuffle(u64),
    /// Evenly strided rows in original order; for curves.
    Stride,
}

/// Outcome of [`fit_power_size`].
#[derive(Debug, Clone)]
pub struct PowerFit {
    pub dataset: Dataset,
    pub base: usize,
    pub exponent: u32,
}

pub const POWER_BASES: [usize; 4] = [2, 3, 5, 7];

/// Largest `n^d ≤ N` for `n` in [`POWER_BASES`] (or only `preferred`).
pub fn largest_power(n_points: usize, preferred: Option<usize>) -> Result<(usize, u32)> {
    if n_points < 2 {
        return Err(Error::invalid("power fitting needs at least two points"));
    }
    let bases: Vec<usize> = match preferred {
        Some(b) if b >= 2 => vec![b],
        Some(b) => return Err(Error::invalid(format!("base must be >= 2, got {b}"))),
        None => POWER_BASES.to_vec(),
    };
    let mut best = (0, 2, 0);
    for b in bases {
        let (mut p, mut d) = (1usize, 0u32);
        while let Some(next) = p.checked_mul(b).filter(|&v| v <= n_points) {
            p = next;
            d += 1;
        }
        if d > 0 && p > best.0 {
            best = (p, b, d);
        }
    }
    if best.0 == 0 {
        return Err(Error::invalid(format!("no power of the requested base fits {n_points} points")));
    }
    Ok((best.1, best.2))
}

pub fn fit_power_size(d: &Dataset, preferred: Option<usize>, how: Subsample) -> Result<PowerFit> {
    let (base, exponent) = largest_power(d.len(), preferred)?;
    let keep = base.pow(exponent);
    let idx: Vec<usize> = if keep == d.len() {
        (0..keep).collect()
    } else {
        match how {
            Subsample::Shuffle(seed) => {
                let mut all: Vec<usize> = (0..d.len()).collect();
                all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                all.truncate(keep);
                all
            }
            Subsample::Stride => (0..keep).map(|i| i * d.len() / keep).collect(),
        }
    };
    Ok(PowerFit {
        dataset: d.select(&idx),
        base,
        exponent,
    })
}
