mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::Settings;
use crate::error::Result;

#[derive(Parser)]
#[command(name = "tnkf", version, about = "LS-SVM training with a tensor-network Kalman filter")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset as CSV.
    Gen(GenArgs),
    /// Train a model and write it with a per-iteration trace.
    Train(RunArgs),
    /// Predict with `±3σ` bounds and report test metrics.
    Predict(RunArgs),
    /// Compare solvers on one dataset.
    Bench(RunArgs),
    /// Export kernel-matrix eigenvalues for several sizes.
    Spectrum(SpectrumArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum DatasetKind {
    Sinc,
    TwoSpiral,
}

#[derive(Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub dataset: DatasetKind,
    #[arg(long)]
    pub n: usize,
    /// Noise standard deviation (sinc).
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Input interval `LO,HI` (sinc).
    #[arg(long, value_parser = parse_pair)]
    pub domain: Option<(f64, f64)>,
    /// Coordinate scale (two-spiral).
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Gaussian jitter in scaled units (two-spiral).
    #[arg(long, default_value_t = 0.0)]
    pub jitter: f64,
    /// Output file; standard output if omitted.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

/// Settings come from `--config`, then `--set`, then the named flags.
#[derive(Args, Default)]
pub struct RunArgs {
    /// Flat `key = value` file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extra `KEY=VALUE` setting; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long)]
    pub test: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub trace: Option<String>,
    #[arg(short, long)]
    pub out: Option<String>,
    #[arg(long)]
    pub columns: Option<String>,
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub sigma2: Option<String>,
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long)]
    pub sigma_e2: Option<String>,
    #[arg(long)]
    pub sigma_r2: Option<String>,
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub max_iterations: Option<String>,
    #[arg(long)]
    pub methods: Option<String>,
    #[arg(long)]
    pub samples: Option<String>,
    #[arg(long)]
    pub eigenpairs: Option<String>,
    /// Subsample the data to the largest `n^d` rows before training.
    #[arg(long)]
    pub auto_size: bool,
    /// Files have no header row.
    #[arg(long)]
    pub no_header: bool,
}

impl RunArgs {
    pub fn settings(&self) -> Result<Settings> {
        let mut s = match &self.config {
            Some(p) => Settings::load(p)?,
            None => Settings::default(),
        };
        for pair in &self.set {
            s.set_pair(pair)?;
        }
        let named = [
            ("data", &self.data),
            ("test", &self.test),
            ("model", &self.model),
            ("trace", &self.trace),
            ("out", &self.out),
            ("columns", &self.columns),
            ("task", &self.task),
            ("kernel", &self.kernel),
            ("sigma2", &self.sigma2),
            ("gamma", &self.gamma),
            ("sigma_e2", &self.sigma_e2),
            ("sigma_r2", &self.sigma_r2),
            ("lambda", &self.lambda),
            ("seed", &self.seed),
            ("max_iterations", &self.max_iterations),
            ("methods", &self.methods),
            ("samples", &self.samples),
            ("eigenpairs", &self.eigenpairs),
        ];
        for (k, v) in named {
            if let Some(v) = v {
                s.set(k, v)?;
            }
        }
        if self.auto_size {
            s.set("auto_size", "true")?;
        }
        if self.no_header {
            s.set("header", "false")?;
        }
        Ok(s)
    }
}

#[derive(Args)]
pub struct SpectrumArgs {
    /// Generated inputs; ignored when `--data` is given.
    #[arg(long, value_enum, default_value = "two-spiral")]
    pub dataset: DatasetKind,
    /// CSV whose first rows are used as inputs (all columns but the last).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    #[arg(long, default_value = "rbf")]
    pub kernel: String,
    #[arg(long, default_value_t = 5e-8)]
    pub sigma2: f64,
    /// Coordinate scale (two-spiral).
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Relative level for the reported eigenvalue counts.
    #[arg(long, default_value_t = 1e-3)]
    pub level: f64,
    #[arg(long)]
    pub no_header: bool,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected LO,HI")?;
    let lo = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let hi = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok((lo, hi))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => commands::gen(&a),
        Command::Train(a) => commands::train(&a.settings()?),
        Command::Predict(a) => commands::predict(&a.settings()?),
        Command::Bench(a) => commands::bench(&a.settings()?),
        Command::Spectrum(a) => commands::spectrum(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
