//! Monte Carlo MIARE benchmark.
//!
//! For every density, sample size and replication a sample is drawn, each
//! estimator picks its smoothing parameter by its own rule, is evaluated on
//! an equispaced grid from `grid_start` to the true 99.9% quantile and
//! renormalized, and the integrated absolute relative error
//! `Σ |f̂(x_i) − f(x_i)| / f(x_i)` is recorded over the whole grid and over
//! the points above the tail quantile.
//!
//! Samples depend only on `(seed, density index, size index, replication)`,
//! so every estimator sees the same data and adding estimators never changes
//! the draws. Results do not depend on the number of worker threads.

use crate::bandwidth::{
    default_alpha_grid, gamma_reference_bandwidth, plugin_bandwidth, select_smoothing,
};
use crate::competitors::{self, Competitor, CompetitorConfig};
use crate::error::{Error, Result};
use crate::genf::{DensitySpec, GenFParams};
use crate::kernels::Kernel;
use crate::quadrature::linspace;
use crate::tkde::{self, DensityEstimate, TkdeConfig};
use crate::transforms::Transformation;
use crate::SmoothingSpec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::{self, Write as _};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BenchEstimator {
    #[serde(rename = "gamma")]
    Gamma,
    #[serde(rename = "mod-gamma")]
    ModifiedGamma,
    #[serde(rename = "reflect")]
    Reflection,
    #[serde(rename = "can")]
    CutAndNormalise,
    #[serde(rename = "bound")]
    BoundaryCorrected,
    /// Log-normal kernel estimator, plug-in bandwidth on the log data.
    #[serde(rename = "naive-lt")]
    NaiveLog,
    /// Log transform, local log-quadratic fit, LSCV nearest-neighbour α.
    #[serde(rename = "ll-lt")]
    LocalLog,
    /// Probex transform, local log-quadratic fit, LSCV nearest-neighbour α.
    #[serde(rename = "ll-pt")]
    LocalProbex,
}

impl BenchEstimator {
    pub const ALL: [BenchEstimator; 8] = [
        BenchEstimator::Gamma,
        BenchEstimator::ModifiedGamma,
        BenchEstimator::Reflection,
        BenchEstimator::CutAndNormalise,
        BenchEstimator::BoundaryCorrected,
        BenchEstimator::NaiveLog,
        BenchEstimator::LocalLog,
        BenchEstimator::LocalProbex,
    ];

    pub fn id(self) -> &'static str {
        match self {
            BenchEstimator::Gamma => "gamma",
            BenchEstimator::ModifiedGamma => "mod-gamma",
            BenchEstimator::Reflection => "reflect",
            BenchEstimator::CutAndNormalise => "can",
            BenchEstimator::BoundaryCorrected => "bound",
            BenchEstimator::NaiveLog => "naive-lt",
            BenchEstimator::LocalLog => "ll-lt",
            BenchEstimator::LocalProbex => "ll-pt",
        }
    }

    pub fn competitor(self) -> Option<Competitor> {
        Some(match self {
            BenchEstimator::Gamma => Competitor::Gamma,
            BenchEstimator::ModifiedGamma => Competitor::ModifiedGamma,
            BenchEstimator::Reflection => Competitor::Reflection,
            BenchEstimator::CutAndNormalise => Competitor::CutAndNormalise,
            BenchEstimator::BoundaryCorrected => Competitor::BoundaryCorrected,
            _ => return None,
        })
    }
}

impl fmt::Display for BenchEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for BenchEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.id() == s)
            .ok_or_else(|| Error::unknown("benchmark estimator", s))
    }
}

/// How grid errors are aggregated into one number.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiareScale {
    /// `Σ_i |f̂ − f| / f` over the grid points in the region.
    Sum,
    /// The sum divided by the number of points in the region.
    #[default]
    Mean,
    /// The mean times the length of the region, a Riemann approximation of
    /// `∫ |f̂ − f| / f`.
    Integral,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Full,
    /// Grid points strictly above the given threshold.
    Tail(f64),
}

fn default_grid_size() -> usize {
    1000
}
fn default_grid_start() -> f64 {
    0.001
}
fn default_tail_quantile() -> f64 {
    0.80
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub densities: Vec<DensitySpec>,
    pub estimators: Vec<BenchEstimator>,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default = "default_grid_start")]
    pub grid_start: f64,
    #[serde(default = "default_tail_quantile")]
    pub tail_quantile: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scale: MiareScale,
    /// LSCV candidates for the local-likelihood estimators; defaults to
    /// `0.10, 0.15, …, 1.00`.
    #[serde(default)]
    pub alpha_grid: Option<Vec<f64>>,
}

impl BenchConfig {
    pub fn new(
        densities: Vec<DensitySpec>,
        estimators: Vec<BenchEstimator>,
        sample_sizes: Vec<usize>,
        replications: usize,
    ) -> Self {
        Self {
            densities,
            estimators,
            sample_sizes,
            replications,
            grid_size: default_grid_size(),
            grid_start: default_grid_start(),
            tail_quantile: default_tail_quantile(),
            seed: 0,
            scale: MiareScale::default(),
            alpha_grid: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.densities.is_empty() || self.estimators.is_empty() || self.sample_sizes.is_empty() {
            return Err(Error::invalid(
                "densities, estimators and sample sizes must be non-empty",
            ));
        }
        if self.replications < 1 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if self.grid_size < 2 {
            return Err(Error::invalid("grid size must be at least 2"));
        }
        if !(self.grid_start > 0.0 && self.grid_start.is_finite()) {
            return Err(Error::invalid(format!(
                "grid start must be positive, got {}",
                self.grid_start
            )));
        }
        if !(self.tail_quantile > 0.0 && self.tail_quantile < 1.0) {
            return Err(Error::invalid(format!(
                "tail quantile must be in (0, 1), got {}",
                self.tail_quantile
            )));
        }
        if let Some(&n) = self.sample_sizes.iter().find(|&&n| n < 10) {
            return Err(Error::invalid(format!(
                "sample sizes must be at least 10, got {n}"
            )));
        }
        for d in &self.densities {
            d.params()?;
        }
        if let Some(g) = &self.alpha_grid {
            if g.is_empty() {
                return Err(Error::invalid("empty alpha grid"));
            }
            for &a in g {
                SmoothingSpec::NnFraction(a).validate()?;
            }
        }
        Ok(())
    }

    fn alpha_candidates(&self) -> Vec<SmoothingSpec> {
        match &self.alpha_grid {
            Some(g) => g.iter().map(|&a| SmoothingSpec::NnFraction(a)).collect(),
            None => default_alpha_grid(),
        }
    }
}

/// Statistics for one `(density, estimator, n)` combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub density: String,
    pub estimator: BenchEstimator,
    pub n: usize,
    pub miare_mean: f64,
    pub miare_se: f64,
    pub tail_mean: f64,
    pub tail_se: f64,
    /// Successful replications.
    pub replications: usize,
    pub failures: usize,
    /// Average selected smoothing value (`h`, `b` or `α`).
    pub mean_smoothing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub scale: MiareScale,
    pub tail_quantile: f64,
    pub cells: Vec<BenchCell>,
}

/// Relative error of `estimate` against `truth` over `region`.
pub fn miare(
    estimate: &DensityEstimate,
    truth: &GenFParams,
    region: Region,
    scale: MiareScale,
) -> Result<f64> {
    let truth_values: Vec<f64> = estimate.grid.iter().map(|&x| truth.pdf(x)).collect();
    miare_values(
        &estimate.grid,
        &estimate.values,
        &truth_values,
        region,
        scale,
    )
}

fn miare_values(
    grid: &[f64],
    values: &[f64],
    truth: &[f64],
    region: Region,
    scale: MiareScale,
) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for ((&x, &v), &f) in grid.iter().zip(values).zip(truth) {
        if let Region::Tail(q) = region {
            if x <= q {
                continue;
            }
        }
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::domain(format!("true density is {f} at x = {x}")));
        }
        sum += (v - f).abs() / f;
        count += 1;
        lo = lo.min(x);
        hi = hi.max(x);
    }
    if count == 0 {
        return Err(Error::invalid("no grid points in the MIARE region"));
    }
    Ok(match scale {
        MiareScale::Sum => sum,
        MiareScale::Mean => sum / count as f64,
        MiareScale::Integral => {
            let region_start = match region {
                Region::Full => grid[0],
                Region::Tail(q) => q,
            };
            sum / count as f64 * (hi - region_start.min(lo))
        }
    })
}

/// Evaluation grid: `grid_size` equispaced points from `start` to the 99.9%
/// quantile of `truth`.
pub fn protocol_grid(truth: &GenFParams, start: f64, size: usize) -> Result<Vec<f64>> {
    let q = truth.quantile(0.999)?;
    if !(q > start) {
        return Err(Error::invalid(format!(
            "grid start {start} is not below q_0.999 = {q}"
        )));
    }
    Ok(linspace(start, q, size))
}

/// Seed of one replication, a SplitMix64 hash of its coordinates.
pub fn replication_seed(master: u64, density: usize, size: usize, replication: usize) -> u64 {
    let mut h = master;
    for v in [density as u64, size as u64, replication as u64] {
        h = splitmix64(h ^ splitmix64(v.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Selects the smoothing parameter by the estimator's rule and evaluates it
/// on `grid`, renormalized.
///
/// - local-likelihood estimators: LSCV over `alphas` in the transformed
///   domain, degree 2;
/// - naive log estimator: Sheather–Jones plug-in on the log data;
/// - reflection, cut-and-normalise, boundary-corrected: Sheather–Jones
///   plug-in on the data;
/// - Gamma estimators: Gamma reference rule.
pub fn run_estimator(
    estimator: BenchEstimator,
    sample: &[f64],
    grid: &[f64],
    alphas: &[SmoothingSpec],
) -> Result<DensityEstimate> {
    let local = |t: Transformation| -> Result<DensityEstimate> {
        let ys = sample
            .iter()
            .map(|&x| t.forward(x))
            .collect::<Result<Vec<f64>>>()?;
        let alpha = select_smoothing(&ys, alphas, 2, Kernel::Gaussian)?;
        tkde::estimate(grid, sample, &TkdeConfig::local_quadratic(t, alpha))
    };
    match estimator {
        BenchEstimator::LocalLog => local(Transformation::Log),
        BenchEstimator::LocalProbex => local(Transformation::Probex),
        BenchEstimator::NaiveLog => {
            let logs: Vec<f64> = sample.iter().map(|x| x.ln()).collect();
            let h = plugin_bandwidth(&logs)?;
            let mut config = TkdeConfig::naive(Transformation::Log, h);
            config.renormalize = true;
            tkde::estimate(grid, sample, &config)
        }
        other => {
            let c = other.competitor().expect("competitor estimator");
            let b = if c.is_gamma() {
                gamma_reference_bandwidth(sample)?
            } else {
                plugin_bandwidth(sample)?
            };
            competitors::estimate_grid(grid, sample, &CompetitorConfig::new(c, b), true)
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    full: f64,
    tail: f64,
    smoothing: f64,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (m, (var / n as f64).sqrt())
}

/// Runs the full benchmark. Individual estimator failures are logged and
/// counted in the cell; they never abort the run.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchResult> {
    config.validate()?;
    let alphas = config.alpha_candidates();
    let mut cells = Vec::new();
    for (di, spec) in config.densities.iter().enumerate() {
        let truth = spec.params()?;
        let grid = protocol_grid(&truth, config.grid_start, config.grid_size)?;
        let truth_values: Vec<f64> = grid.iter().map(|&x| truth.pdf(x)).collect();
        let q_tail = truth.quantile(config.tail_quantile)?;
        for (ni, &n) in config.sample_sizes.iter().enumerate() {
            let outcomes: Vec<Vec<Result<Outcome>>> = (0..config.replications)
                .into_par_iter()
                .map(|r| {
                    let sample = truth.sample(n, replication_seed(config.seed, di, ni, r));
                    config
                        .estimators
                        .iter()
                        .map(|&e| {
                            let est = run_estimator(e, &sample, &grid, &alphas)?;
                            Ok(Outcome {
                                full: miare_values(
                                    &grid,
                                    &est.values,
                                    &truth_values,
                                    Region::Full,
                                    config.scale,
                                )?,
                                tail: miare_values(
                                    &grid,
                                    &est.values,
                                    &truth_values,
                                    Region::Tail(q_tail),
                                    config.scale,
                                )?,
                                smoothing: est.smoothing.value(),
                            })
                        })
                        .collect()
                })
                .collect();
            for (ei, &e) in config.estimators.iter().enumerate() {
                let mut full = Vec::with_capacity(config.replications);
                let mut tail = Vec::with_capacity(config.replications);
                let mut smooth = 0.0;
                let mut failures = 0;
                for (r, rep) in outcomes.iter().enumerate() {
                    match &rep[ei] {
                        Ok(o) if o.full.is_finite() && o.tail.is_finite() => {
                            full.push(o.full);
                            tail.push(o.tail);
                            smooth += o.smoothing;
                        }
                        Ok(_) => {
                            log::warn!("{spec} n={n} rep={r} {e}: non-finite MIARE");
                            failures += 1;
                        }
                        Err(err) => {
                            log::warn!("{spec} n={n} rep={r} {e}: {err}");
                            failures += 1;
                        }
                    }
                }
                let (miare_mean, miare_se) = mean_se(&full);
                let (tail_mean, tail_se) = mean_se(&tail);
                cells.push(BenchCell {
                    density: spec.label(),
                    estimator: e,
                    n,
                    miare_mean,
                    miare_se,
                    tail_mean,
                    tail_se,
                    replications: full.len(),
                    failures,
                    mean_smoothing: if full.is_empty() {
                        f64::NAN
                    } else {
                        smooth / full.len() as f64
                    },
                });
            }
        }
    }
    Ok(BenchResult {
        scale: config.scale,
        tail_quantile: config.tail_quantile,
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Json,
    Text,
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "json" => Ok(TableFormat::Json),
            "text" | "table" => Ok(TableFormat::Text),
            _ => Err(Error::unknown("table format", s)),
        }
    }
}

/// For each `(mean, se)`, whether it is the minimum or its 2-SE interval
/// overlaps the 2-SE interval of the minimum. Non-finite means are never
/// marked.
pub fn significance_marks(stats: &[(f64, f64)]) -> Vec<bool> {
    let best = stats
        .iter()
        .enumerate()
        .filter(|(_, (m, _))| m.is_finite())
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .map(|(i, _)| i);
    let Some(b) = best else {
        return vec![false; stats.len()];
    };
    let (mb, sb) = stats[b];
    let reach = mb + 2.0 * sb.max(0.0);
    stats
        .iter()
        .map(|&(m, s)| m.is_finite() && m - 2.0 * s.max(0.0) <= reach)
        .collect()
}

/// Serializes `result`. CSV and JSON carry the same shortest round-trip
/// decimal representation of every number; the text form has one block for
/// the full-range and one for the tail MIARE, with marked entries starred.
pub fn emit_tables(result: &BenchResult, format: TableFormat) -> Result<String> {
    if result.cells.is_empty() {
        return Err(Error::invalid("empty benchmark result"));
    }
    match format {
        TableFormat::Json => {
            serde_json::to_string_pretty(result).map_err(|e| Error::Numerical(e.to_string()))
        }
        TableFormat::Csv => {
            let mut out = String::from(
                "density,estimator,n,miare_mean,miare_se,tail_mean,tail_se,replications,failures,mean_smoothing\n",
            );
            for c in &result.cells {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    c.density,
                    c.estimator,
                    c.n,
                    c.miare_mean,
                    c.miare_se,
                    c.tail_mean,
                    c.tail_se,
                    c.replications,
                    c.failures,
                    c.mean_smoothing
                )
                .expect("write to string");
            }
            Ok(out)
        }
        TableFormat::Text => Ok(text_tables(result)),
    }
}

fn text_tables(result: &BenchResult) -> String {
    let mut estimators: Vec<BenchEstimator> = Vec::new();
    let mut rows: Vec<(String, usize)> = Vec::new();
    for c in &result.cells {
        if !estimators.contains(&c.estimator) {
            estimators.push(c.estimator);
        }
        let key = (c.density.clone(), c.n);
        if !rows.contains(&key) {
            rows.push(key);
        }
    }
    let mut out = String::new();
    for (title, tail) in [("MIARE", false), ("tail MIARE", true)] {
        let _ = writeln!(
            out,
            "{title} ({:?} scale, tail above q_{})",
            result.scale, result.tail_quantile
        );
        let _ = write!(out, "{:<14} {:>6}", "density", "n");
        for e in &estimators {
            let _ = write!(out, " {:>10}", e.id());
        }
        out.push('\n');
        for (d, n) in &rows {
            let stats: Vec<(f64, f64)> = estimators
                .iter()
                .map(|e| {
                    result
                        .cells
                        .iter()
                        .find(|c| &c.density == d && c.n == *n && c.estimator == *e)
                        .map(|c| {
                            if tail {
                                (c.tail_mean, c.tail_se)
                            } else {
                                (c.miare_mean, c.miare_se)
                            }
                        })
                        .unwrap_or((f64::NAN, f64::NAN))
                })
                .collect();
            let marks = significance_marks(&stats);
            let _ = write!(out, "{d:<14} {n:>6}");
            for ((m, _), marked) in stats.iter().zip(marks) {
                let cell = format!("{m:.3}{}", if marked { "*" } else { " " });
                let _ = write!(out, " {cell:>10}");
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}
