//! Command-line schema and config-file expansion.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "immune-sim",
    version,
    about = "Simulate pathogen populations under whole-type immune killing",
    args_override_self = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one trajectory and print it as JSON.
    Run(RunArgs),
    /// Estimate the survival probability at one parameter point.
    Estimate(EstimateArgs),
    /// Estimate survival over a (lambda, r) grid.
    Sweep(SweepArgs),
    /// Bisect for the critical value of lambda or r.
    Bisect(BisectArgs),
    /// Print the closed-form results for a well-mixed model.
    Analytic(AnalyticArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    Lambda,
    R,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// m1, m2, m3 (well-mixed) or s1, s2, s3 (lattice).
    #[arg(long)]
    pub model: String,
    /// Lattice dimension; lattice models only.
    #[arg(long)]
    pub dim: Option<u32>,
    #[arg(long = "max-pop")]
    pub max_pop: Option<u64>,
    #[arg(long = "max-time")]
    pub max_time: Option<f64>,
    #[arg(long = "max-events")]
    pub max_events: Option<u64>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, env = "PATHOGEN_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "out-format", value_enum)]
    pub out_format: Option<OutFormat>,
    /// Write to this file (atomically) instead of stdout.
    #[arg(long = "out-path")]
    pub out_path: Option<PathBuf>,
    /// Plain key=value file with the same keys as the long flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    /// Defaults to 2000 for lattice models and 10000 otherwise.
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long, default_value_t = 0.99)]
    pub confidence: f64,
    /// Worker threads; defaults to the number of cores. Never changes results.
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// Report measured wall time instead of 0 (output is then not byte-reproducible).
    #[arg(long = "wall-time")]
    pub wall_time: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub r: f64,
    /// Record the population time series.
    #[arg(long)]
    pub series: bool,
    /// Sampling stride of the series in time units.
    #[arg(long)]
    pub stride: Option<f64>,
    /// Record the series after every event instead of on a time grid.
    #[arg(long = "every-event")]
    pub every_event: bool,
    /// Record the type genealogy.
    #[arg(long)]
    pub genealogy: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub r: f64,
    #[command(flatten)]
    pub batch: BatchArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma list and/or lo:hi:step ranges.
    #[arg(long)]
    pub lambda: String,
    /// Comma list and/or lo:hi:step ranges.
    #[arg(long)]
    pub r: String,
    #[command(flatten)]
    pub batch: BatchArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BisectArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum)]
    pub axis: AxisArg,
    /// Fixed lambda when bisecting on r.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Fixed r when bisecting on lambda.
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub lo: f64,
    #[arg(long)]
    pub hi: f64,
    #[arg(long, default_value_t = 0.05)]
    pub resolution: f64,
    #[command(flatten)]
    pub batch: BatchArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct AnalyticArgs {
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub r: f64,
    /// Level of the Model 1 comparison chain; defaults to the smallest level
    /// at which the chain drifts upward.
    #[arg(long = "chain-n")]
    pub chain_n: Option<u64>,
    #[arg(long = "out-path")]
    pub out_path: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Finds `--config PATH` (or `--config=PATH`) anywhere after the subcommand.
fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(2);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Turns `key=value` lines into flags. Blank lines and `#` comments are
/// skipped; `true`/`false` values toggle switches.
pub fn config_flags(text: &str) -> Result<Vec<OsString>, String> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key=value", n + 1))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || key == "config" {
            return Err(format!("config line {}: invalid key '{key}'", n + 1));
        }
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                out.push(format!("--{key}").into());
                out.push(value.into());
            }
        }
    }
    Ok(out)
}

/// Inserts config-file flags right after the subcommand so that explicit
/// flags, coming later, override them.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let flags = config_flags(&text)?;
    let mut out: Vec<OsString> = args.iter().take(2).cloned().collect();
    out.extend(flags);
    out.extend(args.into_iter().skip(2));
    Ok(out)
}
