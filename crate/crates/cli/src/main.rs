mod commands;
mod error;
mod ingest;
mod manifest;

use clap::{Args, Parser, Subcommand, ValueEnum};
use error::CliError;
use lltkde::bench::BenchEstimator;
use lltkde::genf::DensitySpec;
use lltkde::{Kernel, Transformation};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

#[derive(Debug, Parser)]
#[command(
    name = "lltkde",
    version,
    about = "Kernel density estimation for positive data"
)]
struct Cli {
    /// Master seed for sampling and benchmarks.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output file; stdout if omitted. A `<out>.manifest.json` is written
    /// next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output format (`text` is accepted by `bench` only).
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Text,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate a density from a column of positive data.
    Estimate(EstimateArgs),
    /// Print the cross-validation score of every smoothing candidate.
    LscvScan(ScanArgs),
    /// Run the Monte Carlo benchmark described by a JSON config.
    Bench(BenchArgs),
    /// Tabulate the leading bias and variance terms for a test density.
    Asymptotics(AsymptoticsArgs),
    /// Draw a sample from a test density.
    Sample(SampleArgs),
}

/// `auto` or a number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Choice {
    Auto,
    Value(f64),
}

impl FromStr for Choice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Choice::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(Choice::Value(v)),
            _ => Err(format!("expected 'auto' or a positive number, got '{s}'")),
        }
    }
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// CSV file with one observation per row.
    #[arg(long, short)]
    input: PathBuf,

    /// Column name or 0-based index (default: first column).
    #[arg(long)]
    column: Option<String>,

    /// Discard nonpositive values instead of failing.
    #[arg(long)]
    drop_nonpositive: bool,

    /// Divide the data by their mean before estimating (default for the
    /// probex transformation).
    #[arg(long, overrides_with = "no_rescale")]
    rescale: bool,

    #[arg(long, overrides_with = "rescale")]
    no_rescale: bool,
}

impl InputArgs {
    fn rescale(&self, default: bool) -> bool {
        if self.rescale {
            true
        } else if self.no_rescale {
            false
        } else {
            default
        }
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,

    /// gamma, mod-gamma, reflect, can, bound, naive-lt, ll-lt or ll-pt.
    #[arg(long, default_value = "ll-pt", value_parser = BenchEstimator::from_str)]
    estimator: BenchEstimator,

    /// Degree of the local log-polynomial (ll-lt and ll-pt).
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
    degree: u8,

    /// Nearest-neighbour fraction, or `auto` for cross-validation.
    #[arg(long)]
    alpha: Option<Choice>,

    /// Fixed bandwidth (`b` for the Gamma estimators), or `auto` for the
    /// estimator's default rule.
    #[arg(long)]
    h: Option<Choice>,

    /// Candidate α values for cross-validation.
    #[arg(long, value_delimiter = ',')]
    alpha_grid: Option<Vec<f64>>,

    #[arg(long, default_value = "gaussian", value_parser = Kernel::from_str)]
    kernel: Kernel,

    /// Number of evaluation points.
    #[arg(long, default_value_t = 1000)]
    grid_points: usize,

    /// Skip renormalization to unit mass.
    #[arg(long)]
    no_renormalize: bool,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    input: InputArgs,

    #[arg(long, default_value = "probex", value_parser = Transformation::from_str)]
    transformation: Transformation,

    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(0..=2))]
    degree: u8,

    /// Scan fixed bandwidths instead of nearest-neighbour fractions.
    #[arg(long)]
    fixed_h: bool,

    /// Candidate α values (default 0.10, 0.15, …, 1.00).
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["h_grid", "fixed_h"])]
    alpha_grid: Option<Vec<f64>>,

    /// Candidate bandwidths (default: 20 log-spaced values).
    #[arg(long, value_delimiter = ',')]
    h_grid: Option<Vec<f64>>,

    #[arg(long, default_value = "gaussian", value_parser = Kernel::from_str)]
    kernel: Kernel,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// JSON benchmark configuration.
    #[arg(long)]
    config: PathBuf,

    /// Override the replication count of the config.
    #[arg(long)]
    replications: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AsymptoticsArgs {
    /// Preset `density-1` … `density-7`.
    #[arg(long, default_value = "density-1", value_parser = DensitySpec::from_str)]
    density: DensitySpec,

    #[arg(long, default_value = "probex", value_parser = Transformation::from_str)]
    transformation: Transformation,

    /// First evaluation point.
    #[arg(long, default_value_t = 0.05)]
    from: f64,

    /// Last evaluation point (default: the 99% quantile).
    #[arg(long)]
    to: Option<f64>,

    #[arg(long, default_value_t = 100)]
    points: usize,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, default_value = "density-1", value_parser = DensitySpec::from_str)]
    density: DensitySpec,

    /// Sample size.
    #[arg(long, short)]
    n: usize,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let out = cli.out.as_deref();
    if cli.format == Format::Text && !matches!(cli.command, Command::Bench(_)) {
        return Err(CliError::Usage(
            "--format text is only available for bench".into(),
        ));
    }
    match &cli.command {
        Command::Estimate(a) => commands::estimate(a, cli.format, out, cli.seed),
        Command::LscvScan(a) => commands::lscv_scan(a, cli.format, out, cli.seed),
        Command::Bench(a) => commands::bench(a, cli.format, out, cli.seed),
        Command::Asymptotics(a) => commands::asymptotics(a, cli.format, out),
        Command::Sample(a) => commands::sample(a, cli.format, out, cli.seed),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
