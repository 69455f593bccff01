//! Local-likelihood density estimation on the real line.
//!
//! At each evaluation point `y` the log-density is modelled locally as a
//! polynomial `a_0 + a_1 (t - y) + … + a_p (t - y)^p` and the coefficients
//! maximise
//!
//! ```text
//! L(a) = Σ_i K((Y_i − y)/h) P(Y_i − y) − n ∫ K((t − y)/h) exp(P(t − y)) dt.
//! ```
//!
//! The estimate is `exp(ã_0)`. Internally the fit works in the scaled
//! coordinates `b_j = a_j h^j`, in which the Hessian is well conditioned
//! whatever the bandwidth.

use crate::bandwidth::SmoothingSpec;
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::quadrature::GaussLegendre;
use crate::tkde::DensityEstimate;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::sync::OnceLock;

/// Beyond this many bandwidths the Gaussian weight underflows to zero.
const GAUSSIAN_REACH: f64 = 40.0;
/// `1/(2h²) − a_2` must stay above this (in scaled units) for the Gaussian
/// integral to exist.
const FEASIBILITY_MARGIN: f64 = 1e-8;
const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFitConfig {
    /// Polynomial degree, 0, 1 or 2.
    pub degree: usize,
    pub kernel: Kernel,
    pub smoothing: SmoothingSpec,
    /// Newton stops once every gradient component is below
    /// `tolerance × Σ_i K((Y_i − y)/h)`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl LocalFitConfig {
    pub fn new(degree: usize, smoothing: SmoothingSpec) -> Self {
        Self {
            degree,
            kernel: Kernel::Gaussian,
            smoothing,
            tolerance: 1e-8,
            max_iterations: 50,
        }
    }

    pub fn with_kernel(mut self, kernel: Kernel) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree > 2 {
            return Err(Error::invalid(format!(
                "local polynomial degree must be 0, 1 or 2, got {}",
                self.degree
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("solver tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        self.smoothing.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalFitResult {
    /// `ã_0, …, ã_p` in the original (unscaled) parameterization.
    pub coefficients: Vec<f64>,
    /// `exp(ã_0)`, or 0 when no observation carries kernel weight.
    pub density: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Bandwidth actually used at this point.
    pub bandwidth: f64,
}

/// Value, gradient and Hessian of the local likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalObjective {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<Vec<f64>>,
}

/// Sample sorted once so that bandwidth look-ups and kernel sums only touch
/// the observations near the evaluation point.
#[derive(Debug, Clone)]
pub struct SortedSample {
    data: Vec<f64>,
}

impl SortedSample {
    pub fn new(sample: &[f64]) -> Result<Self> {
        if sample.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("sample contains non-finite values"));
        }
        Ok(Self {
            data: crate::stats::sorted(sample),
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Kernel sums `S_j = Σ_i K(u_i) u_i^j`, `u_i = (Y_i − y)/h`, `j = 0, 1, 2`.
#[derive(Debug, Clone, Copy)]
struct KernelSums {
    s: [f64; 3],
    n: usize,
}

fn kernel_sums(y: f64, h: f64, data: &[f64], skip: Option<usize>, kernel: Kernel) -> KernelSums {
    let reach = kernel.support().unwrap_or(GAUSSIAN_REACH) * h;
    let lo = data.partition_point(|&v| v < y - reach);
    let hi = data.partition_point(|&v| v <= y + reach);
    let mut s = [0.0; 3];
    for (i, &v) in data.iter().enumerate().take(hi).skip(lo) {
        if Some(i) == skip {
            continue;
        }
        let u = (v - y) / h;
        let k = kernel.eval(u);
        s[0] += k;
        s[1] += k * u;
        s[2] += k * u * u;
    }
    let n = data.len() - usize::from(skip.is_some());
    KernelSums { s, n }
}

/// `ln J_0` and the normalized moments `J_j / J_0`, `j = 0..=4`, of
/// `J_j = ∫ K(u) u^j exp(b_1 u + b_2 u²) du`. `None` when the integral
/// diverges.
fn tilted_moments(kernel: Kernel, b1: f64, b2: f64) -> Option<(f64, [f64; 5])> {
    match kernel {
        Kernel::Gaussian => {
            let d = 1.0 - 2.0 * b2;
            if !(d >= FEASIBILITY_MARGIN) || !b1.is_finite() {
                return None;
            }
            // φ(u)·exp(b_1 u + b_2 u²) ∝ N(m, s²)
            let s2 = 1.0 / d;
            let m = b1 * s2;
            let ln_j0 = 0.5 * s2.ln() + 0.5 * b1 * b1 * s2;
            let m2 = m * m;
            Some((
                ln_j0,
                [
                    1.0,
                    m,
                    m2 + s2,
                    m * (m2 + 3.0 * s2),
                    m2 * m2 + 6.0 * m2 * s2 + 3.0 * s2 * s2,
                ],
            ))
        }
        Kernel::Epanechnikov => {
            if !(b1.is_finite() && b2.is_finite()) {
                return None;
            }
            static RULE: OnceLock<GaussLegendre> = OnceLock::new();
            let gl = RULE.get_or_init(|| GaussLegendre::new(40));
            let half = kernel.support().expect("compact kernel");
            let expo: Vec<f64> = gl
                .nodes()
                .iter()
                .map(|&t| {
                    let u = half * t;
                    b1 * u + b2 * u * u
                })
                .collect();
            let top = expo.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut j = [0.0; 5];
            for ((&t, &w), &e) in gl.nodes().iter().zip(gl.weights()).zip(&expo) {
                let u = half * t;
                let wk = w * half * kernel.eval(u) * (e - top).exp();
                let mut pow = 1.0;
                for jj in j.iter_mut() {
                    *jj += wk * pow;
                    pow *= u;
                }
            }
            let j0 = j[0];
            if !(j0 > 0.0) {
                return None;
            }
            Some((j0.ln() + top, j.map(|v| v / j0)))
        }
    }
}

struct Eval {
    value: f64,
    gradient: [f64; 3],
    hessian: [[f64; 3]; 3],
}

/// Objective in scaled coordinates `b` (length `p + 1`).
fn eval_scaled(b: &[f64], sums: &KernelSums, h: f64, kernel: Kernel) -> Option<Eval> {
    let p = b.len() - 1;
    let b1 = if p >= 1 { b[1] } else { 0.0 };
    let b2 = if p >= 2 { b[2] } else { 0.0 };
    let (ln_j0, mom) = tilted_moments(kernel, b1, b2)?;
    let mass = (b[0] + (sums.n as f64 * h).ln() + ln_j0).exp();
    if !mass.is_finite() {
        return None;
    }
    let mut value = -mass;
    let mut gradient = [0.0; 3];
    let mut hessian = [[0.0; 3]; 3];
    for j in 0..=p {
        value += b[j] * sums.s[j];
        gradient[j] = sums.s[j] - mass * mom[j];
        for k in 0..=p {
            hessian[j][k] = -mass * mom[j + k];
        }
    }
    Some(Eval {
        value,
        gradient,
        hessian,
    })
}

/// Closed-form maximiser for the Gaussian kernel: the tilted weight
/// `φ(u) exp(P(u))` is proportional to a normal density, so the first-order
/// conditions reduce to matching its mass, mean and variance with the
/// kernel-weighted sums.
fn gaussian_start(sums: &KernelSums, h: f64, p: usize) -> Option<Vec<f64>> {
    let [s0, s1, s2] = sums.s;
    let ln_mass = (s0 / (sums.n as f64 * h)).ln();
    match p {
        0 => Some(vec![ln_mass]),
        1 => {
            let m = s1 / s0;
            Some(vec![ln_mass - 0.5 * m * m, m])
        }
        _ => {
            let m = s1 / s0;
            let v = s2 / s0 - m * m;
            if !(v > 1e-10) {
                return None;
            }
            let b2 = 0.5 * (1.0 - 1.0 / v);
            let b1 = m / v;
            let b0 = ln_mass - 0.5 * v.ln() - 0.5 * m * m / v;
            Some(vec![b0, b1, b2])
        }
    }
}

fn sup_norm(g: &[f64; 3], p: usize) -> f64 {
    g[..=p].iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn newton_step(e: &Eval, p: usize) -> Vec<f64> {
    let dim = p + 1;
    let neg_h = DMatrix::from_fn(dim, dim, |i, j| -e.hessian[i][j]);
    let g = DVector::from_fn(dim, |i, _| e.gradient[i]);
    match neg_h.clone().cholesky() {
        Some(ch) => ch.solve(&g).iter().cloned().collect(),
        None => (0..dim)
            .map(|i| {
                let d = neg_h[(i, i)];
                if d > 0.0 {
                    g[i] / d
                } else {
                    0.0
                }
            })
            .collect(),
    }
}

/// Maximizer and iteration count, or the last iterate, iteration count and
/// scaled gradient norm on failure.
type NewtonOutcome = std::result::Result<(Vec<f64>, usize), (Vec<f64>, usize, f64)>;

/// Damped Newton from `start` (scaled coordinates).
fn maximize(start: Vec<f64>, sums: &KernelSums, h: f64, config: &LocalFitConfig) -> NewtonOutcome {
    let p = config.degree;
    let threshold = config.tolerance * sums.s[0];
    let mut b = start;
    let mut cur = match eval_scaled(&b, sums, h, config.kernel) {
        Some(e) => e,
        None => return Err((b, 0, f64::INFINITY)),
    };
    for it in 0..config.max_iterations {
        let gnorm = sup_norm(&cur.gradient, p);
        if gnorm <= threshold {
            return Ok((b, it));
        }
        let delta = newton_step(&cur, p);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let cand: Vec<f64> = b.iter().zip(&delta).map(|(x, d)| x + step * d).collect();
            if let Some(e) = eval_scaled(&cand, sums, h, config.kernel) {
                if e.value > cur.value || sup_norm(&e.gradient, p) < gnorm {
                    b = cand;
                    cur = e;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            return Err((b, it, gnorm));
        }
    }
    let gnorm = sup_norm(&cur.gradient, p);
    if gnorm <= threshold {
        Ok((b, config.max_iterations))
    } else {
        Err((b, config.max_iterations, gnorm))
    }
}

fn unscale(b: &[f64], h: f64) -> Vec<f64> {
    b.iter()
        .enumerate()
        .map(|(j, v)| v / h.powi(j as i32))
        .collect()
}

fn scale(a: &[f64], h: f64) -> Vec<f64> {
    a.iter()
        .enumerate()
        .map(|(j, v)| v * h.powi(j as i32))
        .collect()
}

/// Fit at `y` on sorted data, optionally leaving out observation `skip`.
/// `start` is a warm start in the original parameterization; it is only
/// used when no closed-form start is available.
pub(crate) fn fit_sorted(
    y: f64,
    data: &[f64],
    skip: Option<usize>,
    config: &LocalFitConfig,
    start: Option<&[f64]>,
) -> Result<LocalFitResult> {
    let p = config.degree;
    let n = data.len() - usize::from(skip.is_some());
    // A quadratic needs two distinct points for a finite curvature; lower
    // degrees are well defined from a single one.
    let needed = p.max(1);
    if n < needed {
        return Err(Error::InsufficientData(format!(
            "degree {p} fit needs at least {needed} observations, got {n}"
        )));
    }
    let h = config.smoothing.bandwidth_at(y, data, skip)?;
    let sums = kernel_sums(y, h, data, skip, config.kernel);
    if p == 0 {
        // Σ K (a₀) − nh e^{a₀} peaks at e^{a₀} = S₀/(nh): the kernel estimate.
        let density = sums.s[0] / (n as f64 * h);
        return Ok(LocalFitResult {
            coefficients: vec![density.ln()],
            density,
            converged: density > 0.0,
            iterations: 0,
            bandwidth: h,
        });
    }
    if !(sums.s[0] >= 1e-12 * n as f64) {
        return Ok(LocalFitResult {
            coefficients: vec![f64::NEG_INFINITY; p + 1],
            density: 0.0,
            converged: false,
            iterations: 0,
            bandwidth: h,
        });
    }
    let cold = || {
        let mut b = vec![0.0; p + 1];
        b[0] = (sums.s[0] / (n as f64 * h)).max(1e-300).ln();
        b
    };
    let closed = match config.kernel {
        Kernel::Gaussian => gaussian_start(&sums, h, p),
        _ if p == 0 => Some(cold()),
        _ => None,
    };
    let initial = closed
        .or_else(|| start.map(|a| scale(a, h)))
        .unwrap_or_else(cold);
    let outcome = match maximize(initial, &sums, h, config) {
        Ok(r) => Ok(r),
        // A warm start far from the new optimum can stall; retry cold.
        Err(_) if start.is_some() => maximize(cold(), &sums, h, config),
        Err(e) => Err(e),
    };
    match outcome {
        Ok((b, iterations)) => Ok(LocalFitResult {
            density: b[0].exp(),
            coefficients: unscale(&b, h),
            converged: true,
            iterations,
            bandwidth: h,
        }),
        Err((b, iterations, gradient)) => Err(Error::NonConvergence {
            iterations,
            gradient,
            last: unscale(&b, h),
        }),
    }
}

/// Local likelihood at coefficients `coeffs = (a_0, …, a_p)` with exact
/// gradient and Hessian in the same parameterization.
pub fn local_objective(
    coeffs: &[f64],
    y: f64,
    sample: &[f64],
    config: &LocalFitConfig,
) -> Result<LocalObjective> {
    config.validate()?;
    if coeffs.len() != config.degree + 1 {
        return Err(Error::invalid(format!(
            "expected {} coefficients, got {}",
            config.degree + 1,
            coeffs.len()
        )));
    }
    let sorted = SortedSample::new(sample)?;
    let h = config.smoothing.bandwidth_at(y, sorted.as_slice(), None)?;
    let sums = kernel_sums(y, h, sorted.as_slice(), None, config.kernel);
    let b = scale(coeffs, h);
    let e = eval_scaled(&b, &sums, h, config.kernel).ok_or_else(|| {
        Error::domain("coefficients outside the region where the local likelihood is finite")
    })?;
    let p = config.degree;
    let hp = |j: usize| h.powi(j as i32);
    Ok(LocalObjective {
        value: e.value,
        gradient: (0..=p).map(|j| e.gradient[j] * hp(j)).collect(),
        hessian: (0..=p)
            .map(|j| (0..=p).map(|k| e.hessian[j][k] * hp(j) * hp(k)).collect())
            .collect(),
    })
}

pub fn fit_at(y: f64, sample: &[f64], config: &LocalFitConfig) -> Result<LocalFitResult> {
    config.validate()?;
    let sorted = SortedSample::new(sample)?;
    fit_sorted(y, sorted.as_slice(), None, config, None)
}

/// Fits at every grid point.
///
/// The grid is processed in parallel chunks; inside a chunk each Newton run
/// is warm-started from the previous point's coefficients.
pub fn fit_grid_results(
    grid: &[f64],
    sample: &SortedSample,
    config: &LocalFitConfig,
) -> Result<Vec<LocalFitResult>> {
    config.validate()?;
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(
            "evaluation grid must be strictly increasing",
        ));
    }
    const CHUNK: usize = 64;
    let chunks: Vec<Result<Vec<LocalFitResult>>> = grid
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, ys)| {
            let mut out = Vec::with_capacity(ys.len());
            let mut prev: Option<Vec<f64>> = None;
            for (k, &y) in ys.iter().enumerate() {
                let warm = prev.as_deref().filter(|a| a[0].is_finite());
                let r = fit_sorted(y, sample.as_slice(), None, config, warm).map_err(|e| {
                    Error::GridFit {
                        index: c * CHUNK + k,
                        source: Box::new(e),
                    }
                })?;
                prev = Some(r.coefficients.clone());
                out.push(r);
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::with_capacity(grid.len());
    for c in chunks {
        all.extend(c?);
    }
    Ok(all)
}

/// Density estimate of the sample's own law on `grid`.
pub fn fit_grid(grid: &[f64], sample: &[f64], config: &LocalFitConfig) -> Result<DensityEstimate> {
    let sorted = SortedSample::new(sample)?;
    let results = fit_grid_results(grid, &sorted, config)?;
    Ok(DensityEstimate {
        grid: grid.to_vec(),
        values: results.iter().map(|r| r.density).collect(),
        estimator: format!("loclik-p{}", config.degree),
        smoothing: config.smoothing,
        normalization: 1.0,
    })
}

/// `(1/(nh)) Σ K((Y_i − y)/h)`.
pub fn raw_kde(y: f64, sample: &[f64], h: f64, kernel: Kernel) -> f64 {
    sample
        .iter()
        .map(|&v| kernel.eval((v - y) / h))
        .sum::<f64>()
        / (sample.len() as f64 * h)
}
