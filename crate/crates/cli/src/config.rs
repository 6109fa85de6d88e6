//! Flat `key = value` configuration.
//!
//! Keys are case-insensitive and `-` is read as `_`, so `eps_P` and
//! `eps-p` name the same setting. Command-line flags override the file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use tnkf::data::{CsvSchema, Subsample, Task};
use tnkf::filter::{EarlyStop, FilterConfig, Policies, RowOrder};
use tnkf::kernels::KernelSpec;
use tnkf::persist::InputStorage;
use tnkf::tt::TruncationPolicy;

use crate::error::{CliError, Result};

const KEYS: &[&str] = &[
    "kernel", "sigma2", "degree", "offset", "gamma", "sigma_e2", "sigma_r2", "lambda",
    "eps_m", "eps_c", "eps_p", "eps_k", "eps_yt", "r_m", "r_c", "r_p", "r_k", "r_yt",
    "es_threshold", "es_delta", "es_patience", "max_iterations", "order", "seed", "sym_every",
    "data", "test", "model", "trace", "out", "columns", "header", "task",
    "auto_size", "base", "subsample", "inputs_ref", "train_metrics",
    "methods", "samples", "eigenpairs",
];

/// Raw settings, later keys overriding earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("config line {}: expected `key = value`, got `{line}`", i + 1)))?;
            s.set(k, v.trim())?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Settings::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let k = normalize(key);
        if !KEYS.contains(&k.as_str()) {
            return Err(CliError::usage(format!("unknown config key `{}`", key.trim())));
        }
        self.values.insert(k, value.to_string());
        Ok(())
    }

    /// Parses `key=value` as given to `--set`.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("expected KEY=VALUE, got `{pair}`")))?;
        self.set(k, v.trim())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::usage(format!("`{key}`: cannot parse `{v}`"))),
        }
    }

    fn real(&self, key: &str) -> Result<Option<f64>> {
        match self.parsed::<f64>(key)? {
            Some(v) if !v.is_finite() => Err(CliError::usage(format!("`{key}` must be finite, got {v}"))),
            v => Ok(v),
        }
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.real(key)?.unwrap_or(default);
        if v <= 0.0 {
            return Err(CliError::usage(format!("`{key}` must be > 0, got {v}")));
        }
        Ok(v)
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key).map(str::to_ascii_lowercase).as_deref() {
            None => Ok(default),
            Some("true" | "yes" | "1" | "on") => Ok(true),
            Some("false" | "no" | "0" | "off") => Ok(false),
            Some(v) => Err(CliError::usage(format!("`{key}` must be true or false, got `{v}`"))),
        }
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }

    /// `eps_x` and `r_x` for one filter variable. `eps = 0` means exact.
    fn policy(&self, name: &str) -> Result<TruncationPolicy> {
        let eps = self.real(&format!("eps_{name}"))?;
        let rank = self.parsed::<usize>(&format!("r_{name}"))?;
        let policy = match (eps, rank) {
            (Some(_), Some(_)) => {
                return Err(CliError::usage(format!("set either eps_{name} or r_{name}, not both")));
            }
            (Some(e), None) if e == 0.0 => TruncationPolicy::Exact,
            (Some(e), None) => TruncationPolicy::relative(e)?,
            (None, Some(r)) => TruncationPolicy::max_rank(r)?,
            (None, None) => TruncationPolicy::Exact,
        };
        Ok(policy)
    }
}

/// Which solvers `bench` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Tnkf,
    Nystrom,
    Direct,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Tnkf => "tnkf",
            Method::Nystrom => "nystrom",
            Method::Direct => "direct",
        }
    }
}

/// Validated configuration shared by the training-side commands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kernel: KernelSpec,
    pub gamma: f64,
    pub sigma_e2: Option<f64>,
    pub sigma_r2: f64,
    pub filter: FilterConfig,
    pub policy_yt: TruncationPolicy,
    pub seed: u64,
    pub task: Task,
    pub columns: Option<String>,
    pub header: bool,
    pub auto_size: bool,
    pub base: Option<usize>,
    pub subsample: Option<Subsample>,
    pub inputs: InputStorage,
    pub train_metrics: bool,
    pub methods: Vec<Method>,
    pub samples: Option<usize>,
    pub eigenpairs: usize,
    pub data: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let kernel = match s.get("kernel").map(str::to_ascii_lowercase).as_deref() {
            None | Some("rbf") => KernelSpec::rbf(s.positive("sigma2", 1.0)?)?,
            Some("linear") => KernelSpec::Linear,
            Some("poly" | "polynomial") => {
                let degree = s.parsed::<u32>("degree")?.unwrap_or(2);
                KernelSpec::polynomial(degree, s.real("offset")?.unwrap_or(1.0))?
            }
            Some(k) => return Err(CliError::usage(format!("unknown kernel `{k}` (rbf, linear, poly)"))),
        };
        let sigma_e2 = match s.real("sigma_e2")? {
            Some(v) if v <= 0.0 => return Err(CliError::usage(format!("`sigma_e2` must be > 0, got {v}"))),
            v => v,
        };
        let seed = s.parsed::<u64>("seed")?.unwrap_or(1);
        let early_stop = match (s.real("es_threshold")?, s.real("es_delta")?, s.parsed::<usize>("es_patience")?) {
            (None, None, None) => None,
            (Some(t), Some(d), Some(p)) => Some(EarlyStop {
                p_norm_threshold: t,
                // A negative delta as written in some references bounds
                // the size of the change.
                p_norm_delta_threshold: d.abs(),
                patience: p,
            }),
            _ => return Err(CliError::usage("early stopping needs es_threshold, es_delta and es_patience")),
        };
        let row_order = match s.get("order").map(str::to_ascii_lowercase).as_deref() {
            None | Some("natural") => RowOrder::Natural,
            Some("shuffled" | "shuffle") => RowOrder::Shuffled(seed),
            Some(o) => return Err(CliError::usage(format!("unknown order `{o}` (natural, shuffled)"))),
        };
        let filter = FilterConfig {
            lambda: s.real("lambda")?.unwrap_or(1.0),
            policies: Policies {
                m: s.policy("m")?,
                c: s.policy("c")?,
                p: s.policy("p")?,
                k: s.policy("k")?,
            },
            early_stop,
            max_iterations: s.parsed("max_iterations")?,
            row_order,
            sym_every: s.parsed("sym_every")?.unwrap_or(0),
        };
        filter.validate()?;
        let task = match s.get("task").map(str::to_ascii_lowercase).as_deref() {
            None | Some("regression") => Task::Regression,
            Some("classification") => Task::Classification,
            Some(t) => return Err(CliError::usage(format!("unknown task `{t}` (regression, classification)"))),
        };
        let subsample = match s.get("subsample").map(str::to_ascii_lowercase).as_deref() {
            None => None,
            Some("shuffle") => Some(Subsample::Shuffle(seed)),
            Some("stride") => Some(Subsample::Stride),
            Some(v) => return Err(CliError::usage(format!("unknown subsample `{v}` (shuffle, stride)"))),
        };
        let methods = match s.get("methods") {
            None => vec![Method::Tnkf],
            Some(list) => parse_methods(list)?,
        };
        let eigenpairs = s.parsed::<usize>("eigenpairs")?.unwrap_or(50);
        if eigenpairs == 0 {
            return Err(CliError::usage("`eigenpairs` must be >= 1"));
        }
        let cfg = RunConfig {
            kernel,
            gamma: s.positive("gamma", 1.0)?,
            sigma_e2,
            sigma_r2: s.positive("sigma_r2", 0.01)?,
            filter,
            policy_yt: s.policy("yt")?,
            seed,
            task,
            columns: s.get("columns").map(str::to_string),
            header: s.flag("header", true)?,
            auto_size: s.flag("auto_size", false)?,
            base: s.parsed("base")?,
            subsample,
            inputs: s.path("inputs_ref").map_or(InputStorage::Inline, InputStorage::Reference),
            train_metrics: s.flag("train_metrics", true)?,
            methods,
            samples: s.parsed("samples")?,
            eigenpairs,
            data: s.path("data"),
            test: s.path("test"),
            model: s.path("model"),
            trace: s.path("trace"),
            out: s.path("out"),
        };
        if let Some(b) = cfg.base {
            if b < 2 {
                return Err(CliError::usage(format!("`base` must be >= 2, got {b}")));
            }
        }
        Ok(cfg)
    }

    /// CSV schema for `columns` features of the data file; without a
    /// role string every column but the last is numeric.
    pub fn schema(&self, path: &Path) -> Result<CsvSchema> {
        match &self.columns {
            Some(roles) => Ok(CsvSchema::parse_roles(roles, self.header, self.task)?),
            None => {
                let n = count_columns(path)?;
                if n < 2 {
                    return Err(CliError::Data(format!("{} needs at least one feature and a label column", path.display())));
                }
                Ok(CsvSchema::numeric(n, self.header, self.task))
            }
        }
    }

    pub fn require<'a>(&self, what: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        what.as_deref()
            .ok_or_else(|| CliError::usage(format!("missing `{key}` (flag --{} or config key)", key.replace('_', "-"))))
    }
}

fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let methods = list
        .split([',', '+'])
        .map(str::trim)
        .filter(|m| !m.is_empty())
        .map(|m| match m.to_ascii_lowercase().as_str() {
            "tnkf" => Ok(Method::Tnkf),
            "nystrom" => Ok(Method::Nystrom),
            "direct" => Ok(Method::Direct),
            other => Err(CliError::usage(format!("unknown method `{other}` (tnkf, nystrom, direct)"))),
        })
        .collect::<Result<Vec<_>>>()?;
    if methods.is_empty() {
        return Err(CliError::usage("method list is empty"));
    }
    Ok(methods)
}

fn count_columns(path: &Path) -> Result<usize> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(tnkf::Error::from)?;
    match rdr.records().next() {
        Some(rec) => Ok(rec.map_err(tnkf::Error::from)?.len()),
        None => Err(CliError::Data(format!("{} is empty", path.display()))),
    }
}
