//! Boundary-aware kernel estimators used as benchmarks: Chen's two Gamma
//! kernel estimators, reflection, cut-and-normalise and the non-negative
//! boundary-corrected estimator of Jones and Foster.

use crate::bandwidth::SmoothingSpec;
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::quadrature::{linspace, trapezoid};
use crate::tkde::DensityEstimate;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Competitor {
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
}

impl Competitor {
    pub const ALL: [Competitor; 5] = [
        Competitor::Gamma,
        Competitor::ModifiedGamma,
        Competitor::Reflection,
        Competitor::CutAndNormalise,
        Competitor::BoundaryCorrected,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Competitor::Gamma => "gamma",
            Competitor::ModifiedGamma => "mod-gamma",
            Competitor::Reflection => "reflect",
            Competitor::CutAndNormalise => "can",
            Competitor::BoundaryCorrected => "bound",
        }
    }

    pub fn is_gamma(self) -> bool {
        matches!(self, Competitor::Gamma | Competitor::ModifiedGamma)
    }
}

impl fmt::Display for Competitor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Competitor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Competitor::ALL
            .into_iter()
            .find(|c| c.id() == s)
            .ok_or_else(|| Error::unknown("competitor estimator", s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompetitorConfig {
    pub estimator: Competitor,
    /// `b` for the Gamma estimators, `h` otherwise.
    pub bandwidth: f64,
    /// Ignored by the Gamma estimators.
    pub kernel: Kernel,
}

impl CompetitorConfig {
    pub fn new(estimator: Competitor, bandwidth: f64) -> Self {
        Self {
            estimator,
            bandwidth,
            kernel: Kernel::Gaussian,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bandwidth > 0.0 && self.bandwidth.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "bandwidth must be positive, got {}",
                self.bandwidth
            )))
        }
    }

    pub fn evaluate(&self, x: f64, sample: &[f64]) -> Result<f64> {
        let (h, k) = (self.bandwidth, self.kernel);
        match self.estimator {
            Competitor::Gamma => gamma_kde(x, sample, h, false),
            Competitor::ModifiedGamma => gamma_kde(x, sample, h, true),
            Competitor::Reflection => reflection_kde(x, sample, h, k),
            Competitor::CutAndNormalise => cut_and_normalise_kde(x, sample, h, k),
            Competitor::BoundaryCorrected => boundary_corrected_kde(x, sample, h, k),
        }
    }
}

fn check(x: f64, sample: &[f64], bandwidth: f64) -> Result<()> {
    if !(x >= 0.0) {
        return Err(Error::domain(format!(
            "evaluation point must be non-negative, got {x}"
        )));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::invalid(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    if sample.is_empty() {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    Ok(())
}

/// `(1/(nh)) Σ K((x − X_k)/h)`.
pub fn raw_kde(x: f64, sample: &[f64], h: f64, kernel: Kernel) -> f64 {
    sample
        .iter()
        .map(|&v| kernel.eval((x - v) / h))
        .sum::<f64>()
        / (sample.len() as f64 * h)
}

/// Shape of the modified Gamma kernel: `x/b` for `x ≥ 2b`,
/// `(x/(2b))² + 1` below.
pub fn modified_gamma_shape(x: f64, b: f64) -> f64 {
    if x >= 2.0 * b {
        x / b
    } else {
        let r = x / (2.0 * b);
        r * r + 1.0
    }
}

fn ln_gamma_pdf(v: f64, shape: f64, scale: f64) -> f64 {
    (shape - 1.0) * v.ln() - v / scale - ln_gamma(shape) - shape * scale.ln()
}

/// Gamma kernel estimator `(1/n) Σ g(X_k; ρ(x), b)`, `g` the Gamma density
/// with shape `ρ(x)` and scale `b`; `ρ(x) = x/b + 1` for the standard
/// version and [`modified_gamma_shape`] for the modified one.
pub fn gamma_kde(x: f64, sample: &[f64], b: f64, modified: bool) -> Result<f64> {
    check(x, sample, b)?;
    if let Some(bad) = sample.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::domain(format!(
            "Gamma kernels need positive data, found {bad}"
        )));
    }
    let shape = if modified {
        modified_gamma_shape(x, b)
    } else {
        x / b + 1.0
    };
    Ok(sample
        .iter()
        .map(|&v| ln_gamma_pdf(v, shape, b).exp())
        .sum::<f64>()
        / sample.len() as f64)
}

/// `(1/(nh)) Σ [K((x − X_k)/h) + K((x + X_k)/h)]`.
pub fn reflection_kde(x: f64, sample: &[f64], h: f64, kernel: Kernel) -> Result<f64> {
    check(x, sample, h)?;
    Ok(sample
        .iter()
        .map(|&v| kernel.eval((x - v) / h) + kernel.eval((x + v) / h))
        .sum::<f64>()
        / (sample.len() as f64 * h))
}

/// Raw estimate divided by the kernel mass `W_0(x/h)` left inside the
/// support.
pub fn cut_and_normalise_kde(x: f64, sample: &[f64], h: f64, kernel: Kernel) -> Result<f64> {
    check(x, sample, h)?;
    Ok(raw_kde(x, sample, h, kernel) / kernel.partial_moment(0, x / h))
}

/// Local-linear boundary kernel estimator
/// `(1/(nh)) Σ (W_2 + W_1 u_k) K(u_k) / (W_0 W_2 − W_1²)`,
/// `u_k = (x − X_k)/h`, `W_j = W_j(x/h)`. Can be negative near the boundary.
pub fn linear_boundary_kde(x: f64, sample: &[f64], h: f64, kernel: Kernel) -> Result<f64> {
    check(x, sample, h)?;
    let c = x / h;
    let (w0, w1, w2) = (
        kernel.partial_moment(0, c),
        kernel.partial_moment(1, c),
        kernel.partial_moment(2, c),
    );
    let det = w0 * w2 - w1 * w1;
    Ok(sample
        .iter()
        .map(|&v| {
            let u = (x - v) / h;
            (w2 + w1 * u) * kernel.eval(u)
        })
        .sum::<f64>()
        / (det * sample.len() as f64 * h))
}

/// Non-negative boundary correction
/// `f̂_CN(x) exp(f̂_LL(x)/f̂_CN(x) − 1)`, with `f̂_CN` the cut-and-normalised
/// and `f̂_LL` the local-linear boundary kernel estimate.
pub fn boundary_corrected_kde(x: f64, sample: &[f64], h: f64, kernel: Kernel) -> Result<f64> {
    let cn = cut_and_normalise_kde(x, sample, h, kernel)?;
    if cn <= 0.0 {
        return Ok(0.0);
    }
    let ll = linear_boundary_kde(x, sample, h, kernel)?;
    Ok(cn * (ll / cn - 1.0).exp())
}

/// Points in the renormalization grid.
pub const RENORMALIZATION_POINTS: usize = 4000;

/// Upper end of the range over which a competitor estimate carries mass.
fn mass_range(sample: &[f64], config: &CompetitorConfig) -> f64 {
    let max = sample.iter().cloned().fold(0.0, f64::max);
    let b = config.bandwidth;
    if config.estimator.is_gamma() {
        max + 12.0 * (b * max).sqrt() + 40.0 * b
    } else {
        max + config.kernel.support().unwrap_or(10.0) * b
    }
}

/// Evaluates the estimator on `grid`; with `renormalize`, divides by its
/// trapezoid integral over `[0, max X + reach]` on a 4000-point grid.
pub fn estimate_grid(
    grid: &[f64],
    sample: &[f64],
    config: &CompetitorConfig,
    renormalize: bool,
) -> Result<DensityEstimate> {
    config.validate()?;
    let mut values = grid
        .iter()
        .map(|&x| config.evaluate(x, sample))
        .collect::<Result<Vec<f64>>>()?;
    let mut normalization = 1.0;
    if renormalize {
        let fine = linspace(0.0, mass_range(sample, config), RENORMALIZATION_POINTS);
        let vals = fine
            .iter()
            .map(|&x| config.evaluate(x, sample))
            .collect::<Result<Vec<f64>>>()?;
        let mass = trapezoid(&fine, &vals);
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
        estimator: config.estimator.id().to_string(),
        smoothing: SmoothingSpec::FixedH(config.bandwidth),
        normalization,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp1};

    fn exp_sample(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Exp1.sample(&mut rng)).collect()
    }

    #[test]
    fn gamma_single_point() {
        let v = gamma_kde(0.0, &[1.0], 1.0, false).unwrap();
        assert!((v - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn modified_shape_continuous() {
        let b = 0.3;
        assert!((modified_gamma_shape(2.0 * b, b) - 2.0).abs() < 1e-15);
        let below = modified_gamma_shape(2.0 * b - 1e-12, b);
        assert!((below - 2.0).abs() < 1e-10);
    }

    #[test]
    fn gamma_variants_differ_in_interior() {
        let x = exp_sample(100, 1);
        let b = 0.2;
        for &pt in &[0.5, 1.0, 2.0] {
            let std = gamma_kde(pt, &x, b, false).unwrap();
            let modi = gamma_kde(pt, &x, b, true).unwrap();
            assert!((std - modi).abs() > 1e-6, "x={pt}");
        }
    }

    #[test]
    fn gamma_mass_and_renormalization() {
        // Chen's estimators are not bona fide: mass is lost near the origin.
        let x = exp_sample(60, 2);
        for c in [Competitor::Gamma, Competitor::ModifiedGamma] {
            let cfg = CompetitorConfig::new(c, 0.15);
            let gl = GaussLegendre::new(40);
            let top = mass_range(&x, &cfg);
            let mass = gl.integrate_composite(0.0, top, 400, |t| cfg.evaluate(t, &x).unwrap());
            assert!(mass > 0.5 && mass < 1.1, "{mass}");
            let grid = linspace(0.0, top, 20_001);
            let e = estimate_grid(&grid, &x, &cfg, true).unwrap();
            assert!(
                (e.normalization - mass).abs() < 2e-3 * mass,
                "{} vs {mass}",
                e.normalization
            );
            assert!((e.integral() - 1.0).abs() < 2e-3);
        }
    }

    #[test]
    fn reflection_properties() {
        let x = exp_sample(50, 3);
        let h = 0.3;
        let at0 = reflection_kde(0.0, &x, h, Kernel::Gaussian).unwrap();
        let expected =
            2.0 / (50.0 * h) * x.iter().map(|&v| Kernel::Gaussian.eval(v / h)).sum::<f64>();
        assert!((at0 - expected).abs() < 1e-14);
        let eps = 1e-5;
        let slope = (reflection_kde(eps, &x, h, Kernel::Gaussian).unwrap() - at0) / eps;
        assert!(slope.abs() < 1e-3, "{slope}");
        let far: Vec<f64> = x.iter().map(|v| v + 20.0).collect();
        let pt = 21.0;
        let r = reflection_kde(pt, &far, h, Kernel::Gaussian).unwrap();
        assert!((r - raw_kde(pt, &far, h, Kernel::Gaussian)).abs() < 1e-12);
    }

    #[test]
    fn cut_and_normalise_at_boundary_and_interior() {
        let x = exp_sample(50, 4);
        let h = 0.25;
        let at0 = cut_and_normalise_kde(0.0, &x, h, Kernel::Gaussian).unwrap();
        assert!((at0 - 2.0 * raw_kde(0.0, &x, h, Kernel::Gaussian)).abs() < 1e-14);
        assert!((Kernel::Gaussian.partial_moment(0, 6.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn boundary_kernel_moment_conditions() {
        // The local-linear boundary kernel integrates to one and has zero
        // first moment over u ≤ c.
        let gl = GaussLegendre::new(40);
        let k = Kernel::Gaussian;
        for &c in &[0.0, 0.4, 1.3, 3.0] {
            let (w0, w1, w2) = (
                k.partial_moment(0, c),
                k.partial_moment(1, c),
                k.partial_moment(2, c),
            );
            let det = w0 * w2 - w1 * w1;
            let kl = |u: f64| (w2 + w1 * u) * k.eval(u) / det;
            let m0 = gl.integrate_composite(-40.0, c, 200, kl);
            let m1 = gl.integrate_composite(-40.0, c, 200, |u| u * kl(u));
            assert!(
                (m0 - 1.0).abs() < 1e-10 && m1.abs() < 1e-10,
                "c={c}: {m0} {m1}"
            );
        }
    }

    #[test]
    fn boundary_corrected_nonnegative_and_equal_case() {
        let x = exp_sample(40, 5);
        for &pt in &[0.0, 0.01, 0.1, 0.5, 2.0, 9.0] {
            let v = boundary_corrected_kde(pt, &x, 0.3, Kernel::Gaussian).unwrap();
            assert!(v >= 0.0);
            let cn = cut_and_normalise_kde(pt, &x, 0.3, Kernel::Gaussian).unwrap();
            let ll = linear_boundary_kde(pt, &x, 0.3, Kernel::Gaussian).unwrap();
            if (cn - ll).abs() < 1e-15 {
                assert!((v - cn).abs() < 1e-15);
            }
        }
        // Far from any data the estimate vanishes instead of failing.
        let far = boundary_corrected_kde(1e6, &x, 0.3, Kernel::Gaussian).unwrap();
        assert_eq!(far, 0.0);
    }

    #[test]
    fn symmetric_competitors_reduce_to_raw_kde_in_interior() {
        let x = exp_sample(100, 6);
        let h = 0.2;
        for c in [
            Competitor::Reflection,
            Competitor::CutAndNormalise,
            Competitor::BoundaryCorrected,
        ] {
            let cfg = CompetitorConfig::new(c, h);
            for &pt in &[6.0 * h, 1.5, 3.0] {
                let v = cfg.evaluate(pt, &x).unwrap();
                let raw = raw_kde(pt, &x, h, Kernel::Gaussian);
                assert!((v - raw).abs() < 1e-9, "{c} x={pt}: {v} vs {raw}");
            }
        }
    }

    #[test]
    fn renormalized_competitors_integrate_to_one() {
        let x = exp_sample(100, 7);
        for c in Competitor::ALL {
            let bw = if c.is_gamma() { 0.1 } else { 0.3 };
            let cfg = CompetitorConfig::new(c, bw);
            let top = mass_range(&x, &cfg);
            let grid = linspace(0.0, top, 20_000);
            let est = estimate_grid(&grid, &x, &cfg, true).unwrap();
            assert!(
                (est.integral() - 1.0).abs() < 1e-3,
                "{c}: {}",
                est.integral()
            );
        }
    }

    #[test]
    fn ids_round_trip() {
        for c in Competitor::ALL {
            assert_eq!(c.id().parse::<Competitor>().unwrap(), c);
            assert_eq!(
                serde_json::to_string(&c).unwrap(),
                format!("\"{}\"", c.id())
            );
        }
        assert!("kde".parse::<Competitor>().is_err());
        assert!(gamma_kde(1.0, &[1.0], 0.0, false).is_err());
    }
}
