//! Transformation kernel density estimators on `(0, ∞)`.
//!
//! The sample is mapped through `T`, the density of `Y = T(X)` is estimated
//! on the real line, and the estimate is pulled back with
//! `f_X(x) = f_Y(T(x)) T'(x)`.

use crate::bandwidth::SmoothingSpec;
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::loclik::{fit_grid_results, LocalFitConfig, SortedSample};
use crate::quadrature::{linspace, trapezoid};
use crate::stats;
use crate::transforms::Transformation;
use serde::{Deserialize, Serialize};

/// Points in the transformed-domain grid used for renormalization.
pub const RENORMALIZATION_POINTS: usize = 4000;

/// How the transformed-domain density is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformedFit {
    /// Plain kernel estimator.
    Naive,
    /// Local log-polynomial likelihood fit of the given degree (1 or 2).
    Local(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TkdeConfig {
    pub transformation: Transformation,
    pub fit: TransformedFit,
    pub kernel: Kernel,
    pub smoothing: SmoothingSpec,
    pub renormalize: bool,
}

impl TkdeConfig {
    /// Local log-quadratic fit with the Gaussian kernel, renormalized.
    pub fn local_quadratic(transformation: Transformation, smoothing: SmoothingSpec) -> Self {
        Self {
            transformation,
            fit: TransformedFit::Local(2),
            kernel: Kernel::Gaussian,
            smoothing,
            renormalize: true,
        }
    }

    pub fn naive(transformation: Transformation, h: f64) -> Self {
        Self {
            transformation,
            fit: TransformedFit::Naive,
            kernel: Kernel::Gaussian,
            smoothing: SmoothingSpec::FixedH(h),
            renormalize: false,
        }
    }

    /// Short identifier such as `ll2-probex` or `naive-log`.
    pub fn estimator_id(&self) -> String {
        match self.fit {
            TransformedFit::Naive => format!("naive-{}", self.transformation),
            TransformedFit::Local(p) => format!("ll{p}-{}", self.transformation),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub estimator: String,
    pub smoothing: SmoothingSpec,
    /// The raw estimate was divided by this constant (1 if not renormalized).
    pub normalization: f64,
}

impl DensityEstimate {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Trapezoid integral over the grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.values)
    }
}

fn check_sample(sample: &[f64]) -> Result<()> {
    if sample.is_empty() {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    if let Some(bad) = sample.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::domain(format!(
            "observations must be positive and finite, found {bad}"
        )));
    }
    Ok(())
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if let Some(bad) = grid.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::domain(format!(
            "evaluation points must be positive, found {bad}"
        )));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(
            "evaluation grid must be strictly increasing",
        ));
    }
    Ok(())
}

fn transform_all(t: Transformation, xs: &[f64]) -> Result<Vec<f64>> {
    xs.iter().map(|&x| t.forward(x)).collect()
}

fn warn_on_probex_scale(t: Transformation, sample: &[f64]) {
    if t == Transformation::Probex {
        let m = stats::mean(sample);
        if !(0.1..=10.0).contains(&m) {
            log::warn!(
                "probex transformation applied to a sample with mean {m:.4}; rescale the data to mean 1 first"
            );
        }
    }
}

fn fixed_bandwidth(config: &TkdeConfig) -> Result<f64> {
    match config.smoothing {
        SmoothingSpec::FixedH(h) if h > 0.0 => Ok(h),
        other => Err(Error::invalid(format!(
            "the naive estimator needs a fixed positive bandwidth, got {other}"
        ))),
    }
}

/// `(1/(nh)) Σ K((y − Y_k)/h)` on transformed data.
fn kde_transformed(y: f64, ys: &[f64], h: f64, kernel: Kernel) -> f64 {
    ys.iter().map(|&v| kernel.eval((y - v) / h)).sum::<f64>() / (ys.len() as f64 * h)
}

/// Naive transformation estimator at a single point,
/// `(1/(nh)) Σ K((T(x) − T(X_k))/h) T'(x)`.
pub fn naive_tkde(x: f64, sample: &[f64], config: &TkdeConfig) -> Result<f64> {
    check_sample(sample)?;
    let h = fixed_bandwidth(config)?;
    let t = config.transformation;
    let y = t.forward(x)?;
    let ys = transform_all(t, sample)?;
    Ok(kde_transformed(y, &ys, h, config.kernel) * t.jacobian(x)?)
}

/// Transformed-domain estimate `f̃_Y` at `T(x)` for every grid point,
/// together with the transformed sample.
pub struct TransformedEstimate {
    pub y_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub y_sample: Vec<f64>,
}

/// Estimate of `f_Y` at the points `ys` (any strictly increasing reals).
fn estimate_y(ys: &[f64], y_sample: &SortedSample, config: &TkdeConfig) -> Result<(Vec<f64>, f64)> {
    match config.fit {
        TransformedFit::Naive => {
            let h = fixed_bandwidth(config)?;
            let values = ys
                .iter()
                .map(|&y| kde_transformed(y, y_sample.as_slice(), h, config.kernel))
                .collect();
            Ok((values, h))
        }
        TransformedFit::Local(p) => {
            if !(1..=2).contains(&p) {
                return Err(Error::invalid(format!(
                    "local-likelihood transformation estimators use degree 1 or 2, got {p}"
                )));
            }
            let lc = LocalFitConfig::new(p, config.smoothing).with_kernel(config.kernel);
            let results = fit_grid_results(ys, y_sample, &lc)?;
            let h_max = results.iter().map(|r| r.bandwidth).fold(0.0, f64::max);
            Ok((results.into_iter().map(|r| r.density).collect(), h_max))
        }
    }
}

/// `∫ f̃_Y(y) dy` by trapezoid on [`RENORMALIZATION_POINTS`] points spanning
/// `[min Y − 8ĥ, max Y + 8ĥ]`. Integrating in the transformed domain
/// captures the mass that `f_X` puts arbitrarily close to the origin.
fn transformed_mass(y_sample: &SortedSample, config: &TkdeConfig) -> Result<f64> {
    let data = y_sample.as_slice();
    let (lo, hi) = (data[0], data[data.len() - 1]);
    let reach = match config.smoothing {
        SmoothingSpec::FixedH(h) => h,
        SmoothingSpec::NnFraction(_) => {
            let a = config.smoothing.bandwidth_at(lo, data, None)?;
            let b = config.smoothing.bandwidth_at(hi, data, None)?;
            a.max(b)
        }
    };
    let grid = linspace(lo - 8.0 * reach, hi + 8.0 * reach, RENORMALIZATION_POINTS);
    let (values, _) = estimate_y(&grid, y_sample, config)?;
    Ok(trapezoid(&grid, &values))
}

/// `f̃_Y` evaluated at `T(x)` for each grid point.
pub fn fit_transformed(
    grid: &[f64],
    sample: &[f64],
    config: &TkdeConfig,
) -> Result<TransformedEstimate> {
    check_sample(sample)?;
    check_grid(grid)?;
    let t = config.transformation;
    let y_sample = transform_all(t, sample)?;
    let y_grid = transform_all(t, grid)?;
    let sorted = SortedSample::new(&y_sample)?;
    let (values, _) = estimate_y(&y_grid, &sorted, config)?;
    Ok(TransformedEstimate {
        y_grid,
        values,
        y_sample,
    })
}

/// Transformation estimator on `grid`, naive or local-likelihood according
/// to `config.fit`.
pub fn estimate(grid: &[f64], sample: &[f64], config: &TkdeConfig) -> Result<DensityEstimate> {
    check_sample(sample)?;
    check_grid(grid)?;
    config.smoothing.validate()?;
    let t = config.transformation;
    warn_on_probex_scale(t, sample);
    let y_sample = SortedSample::new(&transform_all(t, sample)?)?;
    let y_grid = transform_all(t, grid)?;
    let (fy, _) = estimate_y(&y_grid, &y_sample, config)?;
    let mut values = Vec::with_capacity(grid.len());
    for (&x, v) in grid.iter().zip(fy) {
        values.push(v * t.jacobian(x)?);
    }
    let mut normalization = 1.0;
    if config.renormalize {
        let mass = transformed_mass(&y_sample, config)?;
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Numerical(format!(
                "cannot renormalize an estimate of mass {mass}"
            )));
        }
        normalization = mass;
        values.iter_mut().for_each(|v| *v /= mass);
    }
    Ok(DensityEstimate {
        grid: grid.to_vec(),
        values,
        estimator: config.estimator_id(),
        smoothing: config.smoothing,
        normalization,
    })
}

/// Local-likelihood transformation estimator
/// `f̃_X(x) = f̃_Y(T(x)) T'(x)`.
pub fn lltkde(grid: &[f64], sample: &[f64], config: &TkdeConfig) -> Result<DensityEstimate> {
    if config.fit == TransformedFit::Naive {
        return Err(Error::invalid(
            "lltkde needs a local-likelihood fit of degree 1 or 2",
        ));
    }
    estimate(grid, sample, config)
}

/// Value at the smallest grid point, the practical stand-in for `f_X(0⁺)`.
pub fn estimate_boundary_value(estimate: &DensityEstimate) -> Result<f64> {
    estimate
        .values
        .first()
        .copied()
        .ok_or_else(|| Error::InsufficientData("empty density estimate".into()))
}

/// 1000 equally spaced points from 0.001 to the empirical 99.9% quantile.
pub fn default_grid(sample: &[f64]) -> Result<Vec<f64>> {
    check_sample(sample)?;
    let q = stats::quantile_sorted(&stats::sorted(sample), 0.999);
    if !(q > 0.001) {
        return Err(Error::invalid(format!(
            "99.9% sample quantile {q} does not exceed the grid start 0.001"
        )));
    }
    Ok(linspace(0.001, q, 1000))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp1};

    fn exp_sample(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Exp1.sample(&mut rng)).collect()
    }

    #[test]
    fn naive_log_is_lognormal_mixture() {
        let x = exp_sample(50, 1);
        let h = 0.4;
        let cfg = TkdeConfig::naive(Transformation::Log, h);
        for &pt in &[0.01, 0.3, 1.0, 2.5, 7.0] {
            let v = naive_tkde(pt, &x, &cfg).unwrap();
            let mix: f64 = x
                .iter()
                .map(|&xk| {
                    let z = (pt.ln() - xk.ln()) / h;
                    (-0.5 * z * z).exp() / (pt * (2.0 * std::f64::consts::PI * h * h).sqrt())
                })
                .sum::<f64>()
                / 50.0;
            assert!((v - mix).abs() <= 1e-12 * mix.max(1e-300), "x={pt}");
        }
    }

    #[test]
    fn naive_single_point() {
        let cfg = TkdeConfig::naive(Transformation::Log, 1.0);
        let v = naive_tkde(1.0, &[1.0], &cfg).unwrap();
        assert!((v - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn naive_integrates_to_one() {
        let x = exp_sample(80, 2);
        let cfg = TkdeConfig::naive(Transformation::Log, 0.3);
        let grid = linspace(1e-6, 60.0, 200_000);
        let mass = estimate(&grid, &x, &cfg).unwrap().integral();
        assert!((mass - 1.0).abs() < 1e-3, "{mass}");
    }

    #[test]
    fn rejects_nonpositive_points() {
        let cfg = TkdeConfig::naive(Transformation::Log, 0.3);
        assert!(matches!(
            naive_tkde(0.0, &[1.0], &cfg),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            naive_tkde(1.0, &[1.0, -2.0], &cfg),
            Err(Error::Domain(_))
        ));
        let ll = TkdeConfig::local_quadratic(Transformation::Log, SmoothingSpec::NnFraction(0.9));
        assert!(lltkde(&[-1.0, 1.0], &[1.0, 2.0, 3.0], &ll).is_err());
    }

    #[test]
    fn recomposition_identity() {
        let x = exp_sample(150, 3);
        let grid = linspace(0.01, 5.0, 50);
        for t in [Transformation::Log, Transformation::Probex] {
            let mut cfg = TkdeConfig::local_quadratic(t, SmoothingSpec::NnFraction(0.7));
            cfg.renormalize = false;
            let est = lltkde(&grid, &x, &cfg).unwrap();
            let fy = fit_transformed(&grid, &x, &cfg).unwrap();
            for ((&g, v), fyv) in grid.iter().zip(&est.values).zip(&fy.values) {
                assert_eq!(*v, fyv * t.jacobian(g).unwrap());
            }
        }
    }

    #[test]
    fn renormalized_estimate_integrates_to_one() {
        let x = exp_sample(200, 4);
        let cfg =
            TkdeConfig::local_quadratic(Transformation::Probex, SmoothingSpec::NnFraction(0.8));
        let grid = linspace(1e-4, 25.0, 20_000);
        let est = lltkde(&grid, &x, &cfg).unwrap();
        assert!((est.integral() - 1.0).abs() < 1e-3, "{}", est.integral());
        assert!(est.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn gumbel_target_under_log() {
        let x = exp_sample(2000, 5);
        let cfg = TkdeConfig::local_quadratic(Transformation::Log, SmoothingSpec::NnFraction(0.5));
        let fy = fit_transformed(&[1.0], &x, &cfg).unwrap();
        assert!(
            (fy.values[0] - (-1f64).exp()).abs() < 0.05,
            "{}",
            fy.values[0]
        );
    }

    #[test]
    fn boundary_value() {
        let est = DensityEstimate {
            grid: vec![0.5],
            values: vec![0.7],
            estimator: "x".into(),
            smoothing: SmoothingSpec::FixedH(1.0),
            normalization: 1.0,
        };
        assert_eq!(estimate_boundary_value(&est).unwrap(), 0.7);
        let empty = DensityEstimate {
            grid: vec![],
            values: vec![],
            ..est
        };
        assert!(estimate_boundary_value(&empty).is_err());
    }

    #[test]
    fn default_grid_shape() {
        let x = exp_sample(500, 6);
        let g = default_grid(&x).unwrap();
        assert_eq!(g.len(), 1000);
        assert_eq!(g[0], 0.001);
    }
}
