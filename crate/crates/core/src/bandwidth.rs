//! Smoothing parameters: nearest-neighbour distances, least-squares
//! cross-validation for the local-likelihood fits, and the reference rules
//! used by the competing estimators.

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::loclik::{fit_sorted, LocalFitConfig, SortedSample};
use crate::quadrature::{linspace, trapezoid, GaussLegendre};
use crate::stats;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::fmt;
use std::str::FromStr;

/// Floor applied to nearest-neighbour distances so that a duplicated
/// observation at the evaluation point cannot produce a zero bandwidth.
pub const MIN_NN_DISTANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum SmoothingSpec {
    /// Constant bandwidth `h` in transformed-domain units.
    FixedH(f64),
    /// Nearest-neighbour fraction `α`: `h(y) = D_α(y)`.
    NnFraction(f64),
}

impl SmoothingSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SmoothingSpec::FixedH(h) if h > 0.0 && h.is_finite() => Ok(()),
            SmoothingSpec::FixedH(h) => Err(Error::invalid(format!(
                "bandwidth must be positive, got {h}"
            ))),
            SmoothingSpec::NnFraction(a) if a > 0.0 && a <= 1.0 => Ok(()),
            SmoothingSpec::NnFraction(a) => Err(Error::invalid(format!(
                "nearest-neighbour fraction must be in (0, 1], got {a}"
            ))),
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            SmoothingSpec::FixedH(v) | SmoothingSpec::NnFraction(v) => v,
        }
    }

    /// Bandwidth at `y` for sorted `data`, ignoring index `skip`.
    pub(crate) fn bandwidth_at(&self, y: f64, data: &[f64], skip: Option<usize>) -> Result<f64> {
        match *self {
            SmoothingSpec::FixedH(h) => Ok(h),
            SmoothingSpec::NnFraction(alpha) => {
                let n = data.len() - usize::from(skip.is_some());
                let k = neighbour_rank(alpha, n)?;
                Ok(nn_distance_sorted(y, data, skip, k))
            }
        }
    }
}

impl fmt::Display for SmoothingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SmoothingSpec::FixedH(h) => write!(f, "h={h}"),
            SmoothingSpec::NnFraction(a) => write!(f, "alpha={a}"),
        }
    }
}

impl FromStr for SmoothingSpec {
    type Err = Error;

    /// Accepts `h=<value>` or `alpha=<value>`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, value) = s
            .split_once('=')
            .ok_or_else(|| Error::unknown("smoothing spec", s))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("cannot parse smoothing value '{value}'")))?;
        let spec = match kind.trim() {
            "h" => SmoothingSpec::FixedH(v),
            "alpha" => SmoothingSpec::NnFraction(v),
            _ => return Err(Error::unknown("smoothing spec", s)),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// `⌊α n⌋`, guarded against `α n` landing a rounding error below an integer.
fn neighbour_rank(alpha: f64, n: usize) -> Result<usize> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!(
            "nearest-neighbour fraction must be in (0, 1], got {alpha}"
        )));
    }
    let k = (alpha * n as f64 + 1e-9).floor() as usize;
    if k == 0 {
        return Err(Error::InsufficientData(format!(
            "alpha = {alpha} selects no neighbour among {n} observations"
        )));
    }
    Ok(k.min(n))
}

/// Distance from `y` to its `k`-th closest point of sorted `data`, found by
/// walking outwards from the insertion point.
fn nn_distance_sorted(y: f64, data: &[f64], skip: Option<usize>, k: usize) -> f64 {
    let mut right = data.partition_point(|&v| v < y);
    let mut left = right;
    let mut dist = 0.0;
    let mut taken = 0;
    while taken < k {
        if Some(right) == skip {
            right += 1;
            continue;
        }
        if left > 0 && Some(left - 1) == skip {
            left -= 1;
            continue;
        }
        let dr = data.get(right).map(|v| v - y);
        let dl = if left > 0 {
            Some(y - data[left - 1])
        } else {
            None
        };
        dist = match (dl, dr) {
            (Some(a), Some(b)) if a <= b => {
                left -= 1;
                a
            }
            (_, Some(b)) => {
                right += 1;
                b
            }
            (Some(a), None) => {
                left -= 1;
                a
            }
            (None, None) => break,
        };
        taken += 1;
    }
    dist.max(MIN_NN_DISTANCE)
}

/// `D_α(y)`: distance from `y` to its `⌊α n⌋`-th closest observation.
pub fn nn_distance(y: f64, sample: &[f64], alpha: f64) -> Result<f64> {
    let k = neighbour_rank(alpha, sample.len())?;
    let mut d: Vec<f64> = sample.iter().map(|v| (v - y).abs()).collect();
    let (_, kth, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(kth.max(MIN_NN_DISTANCE))
}

/// Number of points in the trapezoid grid for `∫ f̃²`.
pub const LSCV_GRID_POINTS: usize = 512;

/// Least-squares cross-validation score
/// `∫ f̃² − (2/n) Σ_k f̃_{(−k)}(Y_k)` of a local fit of degree `degree` on
/// transformed-domain data.
///
/// Leave-one-out terms are exact refits. The integral is a 512-point
/// trapezoid rule over `[min Y − 4ĥ, max Y + 4ĥ]`, with `ĥ` the largest
/// bandwidth used by any of the fits at the data points. Returns `+∞` if any
/// fit fails.
pub fn lscv(
    sample: &[f64],
    candidate: SmoothingSpec,
    degree: usize,
    kernel: Kernel,
) -> Result<f64> {
    if sample.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "cross-validation needs at least 3 observations, got {}",
            sample.len()
        )));
    }
    let config = LocalFitConfig::new(degree, candidate).with_kernel(kernel);
    config.validate()?;
    let sorted = SortedSample::new(sample)?;
    Ok(lscv_sorted(&sorted, &config))
}

fn lscv_sorted(sorted: &SortedSample, config: &LocalFitConfig) -> f64 {
    let data = sorted.as_slice();
    let n = data.len();
    let mut loo_sum = 0.0;
    let mut h_max: f64 = 0.0;
    for (k, &y) in data.iter().enumerate() {
        match fit_sorted(y, data, Some(k), config, None) {
            Ok(r) => {
                loo_sum += r.density;
                h_max = h_max.max(r.bandwidth);
            }
            Err(_) => return f64::INFINITY,
        }
    }
    for &y in [data[0], data[n - 1]].iter() {
        match config.smoothing.bandwidth_at(y, data, None) {
            Ok(h) => h_max = h_max.max(h),
            Err(_) => return f64::INFINITY,
        }
    }
    let grid = linspace(
        data[0] - 4.0 * h_max,
        data[n - 1] + 4.0 * h_max,
        LSCV_GRID_POINTS,
    );
    let mut sq = Vec::with_capacity(grid.len());
    for &y in &grid {
        match fit_sorted(y, data, None, config, None) {
            Ok(r) => sq.push(r.density * r.density),
            Err(_) => return f64::INFINITY,
        }
    }
    let score = trapezoid(&grid, &sq) - 2.0 * loo_sum / n as f64;
    if score.is_finite() {
        score
    } else {
        f64::INFINITY
    }
}

/// LSCV score of every candidate, in the order given.
pub fn lscv_scan(
    sample: &[f64],
    candidates: &[SmoothingSpec],
    degree: usize,
    kernel: Kernel,
) -> Result<Vec<(SmoothingSpec, f64)>> {
    if candidates.is_empty() {
        return Err(Error::invalid("empty candidate list"));
    }
    if sample.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "cross-validation needs at least 3 observations, got {}",
            sample.len()
        )));
    }
    for c in candidates {
        c.validate()?;
    }
    let sorted = SortedSample::new(sample)?;
    Ok(candidates
        .par_iter()
        .map(|&c| {
            let config = LocalFitConfig::new(degree, c).with_kernel(kernel);
            (c, lscv_sorted(&sorted, &config))
        })
        .collect())
}

/// Index of the minimal finite score; exact ties go to the larger
/// smoothing value.
pub fn argmin_score(scores: &[(SmoothingSpec, f64)]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (spec, s)) in scores.iter().enumerate() {
        if !s.is_finite() {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let (bspec, bs) = scores[b];
                if *s < bs || (*s == bs && spec.value() > bspec.value()) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

/// Candidate minimising the LSCV score.
pub fn select_smoothing(
    sample: &[f64],
    candidates: &[SmoothingSpec],
    degree: usize,
    kernel: Kernel,
) -> Result<SmoothingSpec> {
    let scores = lscv_scan(sample, candidates, degree, kernel)?;
    argmin_score(&scores)
        .map(|i| scores[i].0)
        .ok_or(Error::NoFeasibleCandidate)
}

/// `α ∈ {0.10, 0.15, …, 1.00}`.
pub fn default_alpha_grid() -> Vec<SmoothingSpec> {
    (2..=20)
        .map(|i| SmoothingSpec::NnFraction(i as f64 / 20.0))
        .collect()
}

/// 20 log-spaced bandwidths from `0.1 σ̂ n^{-1/5}` to `3 σ̂`.
pub fn default_h_grid(sample: &[f64]) -> Result<Vec<SmoothingSpec>> {
    if sample.len() < 2 {
        return Err(Error::InsufficientData(
            "need at least 2 observations".into(),
        ));
    }
    let sd = stats::std_dev(sample);
    if !(sd > 0.0) {
        return Err(Error::InsufficientData("sample has zero variance".into()));
    }
    let lo = (0.1 * sd * (sample.len() as f64).powf(-0.2)).ln();
    let hi = (3.0 * sd).ln();
    Ok(linspace(lo, hi, 20)
        .into_iter()
        .map(|l| SmoothingSpec::FixedH(l.exp()))
        .collect())
}

/// `(1/(n(n−1)h^{r+1})) Σ_{i,j} φ^{(r)}((X_i − X_j)/h)` for `r = 4, 6`,
/// summing exactly over pairs of sorted data.
fn phi_functional(sorted: &[f64], h: f64, order: u32) -> f64 {
    // φ^{(r)}(u) · √(2π) e^{u²/2} as a polynomial in δ = u².
    let poly = |d: f64| match order {
        4 => d * d - 6.0 * d + 3.0,
        _ => d * d * d - 15.0 * d * d + 45.0 * d - 15.0,
    };
    let reach = 1000f64.sqrt() * h;
    let n = sorted.len();
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = sorted[j] - sorted[i];
            if diff >= reach {
                break;
            }
            let d = (diff / h) * (diff / h);
            sum += (-0.5 * d).exp() * poly(d);
        }
    }
    let total = 2.0 * sum + n as f64 * poly(0.0);
    total / ((n * (n - 1)) as f64 * h.powi(order as i32 + 1) * (2.0 * std::f64::consts::PI).sqrt())
}

/// Sheather–Jones "solve-the-equation" plug-in bandwidth for the Gaussian
/// kernel.
///
/// The pilot functionals use normal-reference bandwidths
/// `a = 1.24 s n^{-1/7}` and `b = 1.23 s n^{-1/9}` with
/// `s = min(σ̂, IQR/1.349)`, and the equation
/// `h = (R(K) / (n φ̂_4(α_2 h^{5/7})))^{1/5}` is solved by bisection.
pub fn plugin_bandwidth(sample: &[f64]) -> Result<f64> {
    let n = sample.len();
    if n < 10 {
        return Err(Error::InsufficientData(format!(
            "plug-in bandwidth needs at least 10 observations, got {n}"
        )));
    }
    let sorted = stats::sorted(sample);
    let sd = stats::std_dev(&sorted);
    let iqr = stats::quantile_sorted(&sorted, 0.75) - stats::quantile_sorted(&sorted, 0.25);
    let scale = if iqr > 0.0 { sd.min(iqr / 1.349) } else { sd };
    if !(scale > 0.0) {
        return Err(Error::InsufficientData("sample has zero variance".into()));
    }
    let nf = n as f64;
    let a = 1.24 * scale * nf.powf(-1.0 / 7.0);
    let b = 1.23 * scale * nf.powf(-1.0 / 9.0);
    let c1 = 1.0 / (2.0 * std::f64::consts::PI.sqrt() * nf);
    let td = -phi_functional(&sorted, b, 6);
    let sda = phi_functional(&sorted, a, 4);
    if !(td > 0.0 && sda > 0.0) {
        return Err(Error::Numerical(
            "plug-in pilot functionals are not positive".into(),
        ));
    }
    let alpha2 = 1.357 * (sda / td).powf(1.0 / 7.0);
    let f = |h: f64| {
        let s = phi_functional(&sorted, alpha2 * h.powf(5.0 / 7.0), 4);
        (c1 / s).powf(0.2) - h
    };
    let hmax = 1.144 * scale * nf.powf(-0.2);
    let (mut lo, mut hi) = (0.1 * hmax, hmax);
    let mut tries = 0;
    while f(lo) * f(hi) > 0.0 {
        tries += 1;
        if tries > 100 {
            return Err(Error::Numerical(
                "plug-in equation has no bracketed root".into(),
            ));
        }
        hi *= 1.2;
        lo /= 1.2;
    }
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Gamma-kernel reference bandwidth.
///
/// Minimises the leading MISE term of the standard Gamma kernel estimator,
/// `b² ∫ (f' + x f''/2)² + (2√π n)^{-1} b^{-1/2} ∫ x^{-1/2} f`, for a
/// Gamma(α̂, β̂) reference with method-of-moments parameters. Both integrals
/// are taken over `[b, ∞)`, which keeps them finite for any shape; the
/// resulting fixed-point equation is iterated to convergence in units of
/// `β̂`, so the rule is exactly scale-equivariant.
pub fn gamma_reference_bandwidth(sample: &[f64]) -> Result<f64> {
    let n = sample.len();
    if n < 10 {
        return Err(Error::InsufficientData(format!(
            "Gamma reference rule needs at least 10 observations, got {n}"
        )));
    }
    if sample.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::domain("Gamma reference rule requires positive data"));
    }
    let m = stats::mean(sample);
    let var = stats::variance(sample);
    if !(var > 0.0) {
        return Err(Error::InsufficientData("sample has zero variance".into()));
    }
    let shape = m * m / var;
    let scale = var / m;
    let nf = n as f64;
    let rule = GaussLegendre::new(40);
    let mut b = 0.5 * nf.powf(-0.4);
    for _ in 0..200 {
        let (v, bias) = gamma_reference_integrals(shape, b, &rule);
        let next = (v / (4.0 * bias)).powf(0.4) * nf.powf(-0.4);
        let done = (next - b).abs() <= 1e-13 * b;
        b = next;
        if done {
            break;
        }
    }
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::Numerical(
            "Gamma reference rule did not produce a bandwidth".into(),
        ));
    }
    Ok(b * scale)
}

/// `(∫_lo^∞ x^{-1/2} f / (2√π), ∫_lo^∞ (f' + x f''/2)²)` for the unit-scale
/// Gamma(shape) density, integrated in `ln x`.
fn gamma_reference_integrals(shape: f64, lo: f64, rule: &GaussLegendre) -> (f64, f64) {
    let ln_norm = -ln_gamma(shape);
    let aa = 0.5 * shape * (shape - 1.0);
    let upper = (shape + 80.0).ln();
    let lower = lo.ln();
    let panels = 200;
    let v = rule.integrate_composite(lower, upper, panels, |t| {
        let x = t.exp();
        ((shape - 0.5) * t - x + ln_norm).exp()
    }) / (2.0 * std::f64::consts::PI.sqrt());
    let bias = rule.integrate_composite(lower, upper, panels, |t| {
        let x = t.exp();
        let f = ((shape - 1.0) * t - x + ln_norm).exp();
        let g = f * (aa / x - shape + 0.5 * x);
        g * g * x
    });
    (v, bias)
}

/// Normal-reference bandwidth `(4/(3n))^{1/5} σ`.
pub fn normal_reference_bandwidth(n: usize, sd: f64) -> f64 {
    (4.0 / (3.0 * n as f64)).powf(0.2) * sd
}
