//! Leading-order bias and variance of the transformation estimators.
//!
//! Everything is expressed in the original domain from the derivatives of
//! `f_X` and of `T`. The transformed-domain forms (`f_Y` and its
//! derivatives at `y = T(x)`) are available too, computed exactly by Taylor
//! series composition, so the two routes can be checked against each other.
//!
//! The biases are reported without their kernel and bandwidth prefactors:
//! `½ μ₂ h² b` for the naive and log-linear fits and
//! `(μ₂μ₆ − μ₄²)/(24 (μ₄ − μ₂²)) h⁴ b` for the log-quadratic fit.

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::transforms::Transformation;

/// `f, f', f'', f''', f''''` of an original-domain density at `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityDerivatives {
    pub x: f64,
    pub d: [f64; 5],
}

/// Finite-difference steps per derivative order, relative to `max(x, 1)`.
/// Each balances the `O(h²)` truncation error of the five-point stencil
/// against rounding, which grows like `ε / h^k`.
const FD_STEPS: [f64; 4] = [7e-4, 2e-3, 7e-4, 2e-3];

impl DensityDerivatives {
    pub fn new(x: f64, d: [f64; 5]) -> Self {
        Self { x, d }
    }

    /// Standard exponential, `f^{(k)}(x) = (−1)^k e^{−x}`.
    pub fn exponential(x: f64) -> Self {
        let e = (-x).exp();
        Self::new(x, [e, -e, e, -e, e])
    }

    /// Five-point central differences of `f`. Steps are capped at `x/4` so
    /// the stencil stays inside `(0, ∞)`.
    pub fn from_fn<F: Fn(f64) -> f64>(x: f64, f: F) -> Result<Self> {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::domain(format!("derivatives need x > 0, got {x}")));
        }
        let scale = x.max(1.0);
        let at = |h: f64| {
            let h = h.min(x / 4.0);
            (
                h,
                [f(x - 2.0 * h), f(x - h), f(x), f(x + h), f(x + 2.0 * h)],
            )
        };
        let (h, v) = at(FD_STEPS[0] * scale);
        let d1 = (v[0] - 8.0 * v[1] + 8.0 * v[3] - v[4]) / (12.0 * h);
        let (h, v) = at(FD_STEPS[1] * scale);
        let d2 = (-v[0] + 16.0 * v[1] - 30.0 * v[2] + 16.0 * v[3] - v[4]) / (12.0 * h * h);
        let (h, v) = at(FD_STEPS[2] * scale);
        let d3 = (-v[0] + 2.0 * v[1] - 2.0 * v[3] + v[4]) / (2.0 * h * h * h);
        let (h, v) = at(FD_STEPS[3] * scale);
        let d4 = (v[0] - 4.0 * v[1] + 6.0 * v[2] - 4.0 * v[3] + v[4]) / (h * h * h * h);
        let out = Self::new(x, [f(x), d1, d2, d3, d4]);
        if out.d.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(Error::Numerical(format!(
                "non-finite density derivative at x = {x}"
            )))
        }
    }

    fn positive_density(&self) -> Result<f64> {
        let f = self.d[0];
        if f > 0.0 && f.is_finite() {
            Ok(f)
        } else {
            Err(Error::domain(format!(
                "bias formula needs f(x) > 0, got f({}) = {f}",
                self.x
            )))
        }
    }
}

fn t_derivs(x: f64, t: Transformation) -> Result<[f64; 5]> {
    t.derivatives(x)
}

/// Coefficient of `f` in the naive bias, `3T''²/T'⁴ − T'''/T'³`.
/// Identically 1 for the log transform.
pub fn naive_f_coefficient(x: f64, t: Transformation) -> Result<f64> {
    let [t1, t2, t3, ..] = t_derivs(x, t)?;
    Ok(3.0 * t2 * t2 / t1.powi(4) - t3 / t1.powi(3))
}

/// Coefficient of `f` in the log-linear bias, `2T''²/T'⁴ − T'''/T'³`.
/// Vanishes for the log transform.
pub fn loclin_f_coefficient(x: f64, t: Transformation) -> Result<f64> {
    let [t1, t2, t3, ..] = t_derivs(x, t)?;
    Ok(2.0 * t2 * t2 / t1.powi(4) - t3 / t1.powi(3))
}

/// Coefficient multiplying `f'` in the log-quadratic bias (sign included),
/// `−(59T''³/T'⁷ − 42T''T'''/T'⁶ + 5T''''/T'⁵)`. Equals `5x` for the log
/// transform.
pub fn locquad_fprime_coefficient(x: f64, t: Transformation) -> Result<f64> {
    let [t1, t2, t3, t4, _] = t_derivs(x, t)?;
    Ok(-(59.0 * t2.powi(3) / t1.powi(7) - 42.0 * t2 * t3 / t1.powi(6) + 5.0 * t4 / t1.powi(5)))
}

/// Coefficient of `f` in the log-quadratic bias,
/// `80T''⁴/T'⁸ − 87T''²T'''/T'⁷ + 7T'''²/T'⁶ + 15T''T''''/T'⁶ − T⁽⁵⁾/T'⁵`.
/// Vanishes for the log transform.
pub fn locquad_f_coefficient(x: f64, t: Transformation) -> Result<f64> {
    let [t1, t2, t3, t4, t5] = t_derivs(x, t)?;
    Ok(
        80.0 * t2.powi(4) / t1.powi(8) - 87.0 * t2 * t2 * t3 / t1.powi(7)
            + 7.0 * t3 * t3 / t1.powi(6)
            + 15.0 * t2 * t4 / t1.powi(6)
            - t5 / t1.powi(5),
    )
}

/// `b_T(x) = f''/T'² − 3f'T''/T'³ + f (3T''²/T'⁴ − T'''/T'³)`.
pub fn bias_naive(x: f64, t: Transformation, d: &DensityDerivatives) -> Result<f64> {
    let [t1, t2, ..] = t_derivs(x, t)?;
    let [f, f1, f2, ..] = d.d;
    Ok(f2 / (t1 * t1) - 3.0 * f1 * t2 / t1.powi(3) + f * naive_f_coefficient(x, t)?)
}

/// `b_T^{(1)}(x) = (f'' − f'²/f)/T'² − f'T''/T'³ + f (2T''²/T'⁴ − T'''/T'³)`.
pub fn bias_loclin(x: f64, t: Transformation, d: &DensityDerivatives) -> Result<f64> {
    let f = d.positive_density()?;
    let [t1, t2, ..] = t_derivs(x, t)?;
    let [_, f1, f2, ..] = d.d;
    Ok((f2 - f1 * f1 / f) / (t1 * t1) - f1 * t2 / t1.powi(3) + f * loclin_f_coefficient(x, t)?)
}

/// The six groups of the log-quadratic bias `b_T^{(2)}`, in order:
///
/// 0. `(f'''' − 3f''²/f + 2f'⁴/f³) / T'⁴`
/// 1. `−2T''/T'⁵ · (5f''' − 9f'f''/f + 4f'³/f²)`
/// 2. `3T''²/T'⁶ · (9f'' − 5f'²/f)`
/// 3. `−4T'''/T'⁵ · f''`
/// 4. [`locquad_fprime_coefficient`] `· f'`
/// 5. [`locquad_f_coefficient`] `· f`
pub fn locquad_terms(x: f64, t: Transformation, d: &DensityDerivatives) -> Result<[f64; 6]> {
    let f = d.positive_density()?;
    let [t1, t2, t3, _, _] = t_derivs(x, t)?;
    let [_, f1, f2, f3, f4] = d.d;
    Ok([
        (f4 - 3.0 * f2 * f2 / f + 2.0 * f1.powi(4) / f.powi(3)) / t1.powi(4),
        -2.0 * t2 / t1.powi(5) * (5.0 * f3 - 9.0 * f1 * f2 / f + 4.0 * f1.powi(3) / (f * f)),
        3.0 * t2 * t2 / t1.powi(6) * (9.0 * f2 - 5.0 * f1 * f1 / f),
        -4.0 * t3 / t1.powi(5) * f2,
        locquad_fprime_coefficient(x, t)? * f1,
        locquad_f_coefficient(x, t)? * f,
    ])
}

/// `b_T^{(2)}(x)`, the sum of [`locquad_terms`].
pub fn bias_locquad(x: f64, t: Transformation, d: &DensityDerivatives) -> Result<f64> {
    Ok(locquad_terms(x, t, d)?.iter().sum())
}

/// How the bandwidth is chosen, which changes the variance expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandwidthMode {
    /// Fixed `h`; the variance is the returned factor over `nh`.
    Fixed,
    /// Nearest-neighbour fraction `α`; the variance is the returned factor
    /// over `nα`.
    NearestNeighbour,
}

/// Leading variance factor of a degree-`p` fit (`p = 0` is the naive
/// estimator): `V_p f T'` for a fixed bandwidth, `2 V_p f²` for a
/// nearest-neighbour one. `V_0 = V_1 = ν₀`.
pub fn variance_factor(
    x: f64,
    t: Transformation,
    d: &DensityDerivatives,
    degree: usize,
    kernel: Kernel,
    mode: BandwidthMode,
) -> Result<f64> {
    if degree > 2 {
        return Err(Error::invalid(format!(
            "degree must be 0, 1 or 2, got {degree}"
        )));
    }
    let vp = kernel.moments().variance_constant(degree);
    let f = d.d[0];
    Ok(match mode {
        BandwidthMode::Fixed => vp * f * t.jacobian(x)?,
        BandwidthMode::NearestNeighbour => 2.0 * vp * f * f,
    })
}

/// `v_T²(x) = T'(x) f(x)`.
pub fn variance_function(x: f64, t: Transformation, d: &DensityDerivatives) -> Result<f64> {
    Ok(t.jacobian(x)? * d.d[0])
}

/// `(f_Y, f_Y', f_Y'')` at `y = T(x)` from the explicit chain-rule
/// expressions.
pub fn transformed_derivatives(
    x: f64,
    t: Transformation,
    d: &DensityDerivatives,
) -> Result<[f64; 3]> {
    let [t1, t2, t3, ..] = t_derivs(x, t)?;
    let [f, f1, f2, ..] = d.d;
    Ok([
        f / t1,
        f1 / (t1 * t1) - f * t2 / t1.powi(3),
        f2 / t1.powi(3) - 3.0 * f1 * t2 / t1.powi(4) - f * t3 / t1.powi(4)
            + 3.0 * f * t2 * t2 / t1.powi(5),
    ])
}

const JET: usize = 6;
type Jet = [f64; JET];

fn jet_mul(a: &Jet, b: &Jet, order: usize) -> Jet {
    let mut c = [0.0; JET];
    for i in 0..=order {
        for j in 0..=order - i {
            c[i + j] += a[i] * b[j];
        }
    }
    c
}

/// `Σ c_k δ^k` for a series `δ` with zero constant term, to `order`.
fn jet_compose(c: &[f64], delta: &Jet, order: usize) -> Jet {
    let mut out = [0.0; JET];
    let mut power = [0.0; JET];
    power[0] = 1.0;
    for &ck in c {
        for k in 0..=order {
            out[k] += ck * power[k];
        }
        power = jet_mul(&power, delta, order);
    }
    out
}

/// `f_Y^{(k)}(T(x))` for `k = 0..=4`.
///
/// `T⁻¹` is expanded around `y` by series reversion of the Taylor series of
/// `T` at `x`, then `f_Y = f_X(T⁻¹) · (T⁻¹)'` is composed as a truncated
/// power series, so the result is exact up to rounding.
pub fn transformed_jet(x: f64, t: Transformation, d: &DensityDerivatives) -> Result<[f64; 5]> {
    let td = t_derivs(x, t)?;
    // Taylor coefficients of T(x + δ) − T(x).
    let mut tc = [0.0; JET];
    let mut fact = 1.0;
    for k in 1..JET {
        fact *= k as f64;
        tc[k] = td[k - 1] / fact;
    }
    // δ(ε) with T(x + δ) − T(x) = ε.
    let mut s = [0.0; JET];
    for k in 1..JET {
        let r = jet_compose(&tc, &s, k)[k];
        let target = if k == 1 { 1.0 } else { 0.0 };
        s[k] = (target - r) / tc[1];
    }
    // (T⁻¹)'(y + ε) as a series in ε.
    let mut ds = [0.0; JET];
    for k in 0..JET - 1 {
        ds[k] = (k + 1) as f64 * s[k + 1];
    }
    let mut fc = [0.0; 5];
    let mut fact = 1.0;
    for k in 0..5 {
        if k > 0 {
            fact *= k as f64;
        }
        fc[k] = d.d[k] / fact;
    }
    let fx = jet_compose(&fc, &s, 4);
    let fy = jet_mul(&fx, &ds, 4);
    let mut out = [0.0; 5];
    let mut fact = 1.0;
    for k in 0..5 {
        if k > 0 {
            fact *= k as f64;
        }
        out[k] = fy[k] * fact;
    }
    Ok(out)
}

/// `T'(x) f_Y''(T(x))`, the transformed-domain route to [`bias_naive`].
pub fn bias_naive_transformed(x: f64, t: Transformation, d: &DensityDerivatives) -> Result<f64> {
    let fy = transformed_jet(x, t, d)?;
    Ok(t.jacobian(x)? * fy[2])
}

/// `T'(x) (f_Y'' − f_Y'²/f_Y)(T(x))`, the transformed-domain route to
/// [`bias_loclin`].
pub fn bias_loclin_transformed(x: f64, t: Transformation, d: &DensityDerivatives) -> Result<f64> {
    d.positive_density()?;
    let fy = transformed_jet(x, t, d)?;
    Ok(t.jacobian(x)? * (fy[2] - fy[1] * fy[1] / fy[0]))
}

/// `b_Y^{(2)} = f_Y'''' − 3f_Y''²/f_Y + 2f_Y'⁴/f_Y³`.
pub fn locquad_transformed_bias(fy: &[f64; 5]) -> f64 {
    fy[4] - 3.0 * fy[2] * fy[2] / fy[0] + 2.0 * fy[1].powi(4) / fy[0].powi(3)
}

/// `T'(x) b_Y^{(2)}(T(x))`, the transformed-domain route to
/// [`bias_locquad`].
pub fn bias_locquad_transformed(x: f64, t: Transformation, d: &DensityDerivatives) -> Result<f64> {
    d.positive_density()?;
    let fy = transformed_jet(x, t, d)?;
    Ok(t.jacobian(x)? * locquad_transformed_bias(&fy))
}

/// One row of an asymptotics table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticRow {
    pub x: f64,
    pub bias_naive: f64,
    pub bias_loclin: f64,
    pub bias_locquad: f64,
    pub variance: f64,
}

pub fn asymptotic_row(x: f64, t: Transformation, d: &DensityDerivatives) -> Result<AsymptoticRow> {
    Ok(AsymptoticRow {
        x,
        bias_naive: bias_naive(x, t, d)?,
        bias_loclin: bias_loclin(x, t, d)?,
        bias_locquad: bias_locquad(x, t, d)?,
        variance: variance_function(x, t, d)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal;

    const TS: [Transformation; 2] = [Transformation::Log, Transformation::Probex];

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn exponential_log_closed_forms() {
        for &x in &[0.1, 0.5, 1.0, 2.0, 4.0] {
            let d = DensityDerivatives::exponential(x);
            let e = (-x).exp();
            let t = Transformation::Log;
            assert!(rel(bias_naive(x, t, &d).unwrap(), e * (x * x - 3.0 * x + 1.0)) < 1e-12);
            // x²(f'' − f'²/f) + x f', which is −x e^{−x} here.
            assert!(rel(bias_loclin(x, t, &d).unwrap(), -x * e) < 1e-12);
            assert!(rel(bias_locquad(x, t, &d).unwrap(), e * x * (4.0 * x - 5.0)) < 1e-12);
        }
        let d = DensityDerivatives::exponential(1.0);
        let e1 = (-1f64).exp();
        assert!((bias_naive(1.0, Transformation::Log, &d).unwrap() + e1).abs() < 1e-15);
        assert!((bias_locquad(1.0, Transformation::Log, &d).unwrap() + e1).abs() < 1e-15);
    }

    #[test]
    fn log_coefficients() {
        let t = Transformation::Log;
        for i in 1..=100 {
            let x = 0.1 * i as f64;
            assert!((naive_f_coefficient(x, t).unwrap() - 1.0).abs() < 1e-10);
            assert!(loclin_f_coefficient(x, t).unwrap().abs() < 1e-10);
            assert!(locquad_f_coefficient(x, t).unwrap().abs() < 1e-10);
            assert!(rel(locquad_fprime_coefficient(x, t).unwrap(), 5.0 * x) < 1e-12);
        }
    }

    #[test]
    fn isolated_f_term() {
        let d = DensityDerivatives::new(0.7, [0.3, 0.0, 0.0, 0.0, 0.0]);
        for t in TS {
            let b = bias_naive(0.7, t, &d).unwrap();
            assert!(rel(b, 0.3 * naive_f_coefficient(0.7, t).unwrap()) < 1e-14);
        }
    }

    #[test]
    fn gumbel_in_log_domain() {
        for &y in &[-4.0, -1.0, 0.0, 1.5] {
            let x = f64::exp(y);
            let d = DensityDerivatives::exponential(x);
            let fy = transformed_derivatives(x, Transformation::Log, &d).unwrap();
            assert!(rel(fy[0], (y - x).exp()) < 1e-13);
        }
    }

    #[test]
    fn normal_in_probex_domain() {
        // Exp(1) pulled through probex is exactly N(0, 1).
        for &y in &[-3.0, -1.0, 0.0, 0.8, 2.0] {
            let x = Transformation::Probex.inverse(y);
            let d = DensityDerivatives::exponential(x);
            let fy = transformed_jet(x, Transformation::Probex, &d).unwrap();
            let p = normal::pdf(y);
            let expect = [
                p,
                -y * p,
                (y * y - 1.0) * p,
                (3.0 * y - y.powi(3)) * p,
                (y.powi(4) - 6.0 * y * y + 3.0) * p,
            ];
            for k in 0..5 {
                assert!(
                    (fy[k] - expect[k]).abs() < 1e-8 * (1.0 + expect[k].abs()),
                    "y={y} k={k}"
                );
            }
            // Local log-quadratic model is exact: b_Y = 0.
            assert!(locquad_transformed_bias(&fy).abs() < 1e-8);
            let bl = bias_loclin_transformed(x, Transformation::Probex, &d).unwrap();
            assert!((bl + t1(x)).abs() < 1e-8 * t1(x));
        }
        fn t1(x: f64) -> f64 {
            Transformation::Probex.jacobian(x).unwrap()
                * normal::pdf(Transformation::Probex.forward(x).unwrap())
        }
    }

    #[test]
    fn jet_matches_explicit_chain_rule() {
        for t in TS {
            for &x in &[0.05, 0.3, 1.0, 3.0] {
                let d = DensityDerivatives::exponential(x);
                let a = transformed_derivatives(x, t, &d).unwrap();
                let b = transformed_jet(x, t, &d).unwrap();
                for k in 0..3 {
                    assert!(rel(a[k], b[k]) < 1e-10, "{t} x={x} k={k}");
                }
            }
        }
    }

    #[test]
    fn constant_slope_identity() {
        // f_X = T' g(T) with g = N(0,1) gives f_Y = g.
        let t = Transformation::Log;
        let x = 2.0;
        let f = |x: f64| normal::pdf(x.ln()) / x;
        let d = DensityDerivatives::from_fn(x, f).unwrap();
        let fy = transformed_derivatives(x, t, &d).unwrap();
        let y = x.ln();
        assert!(rel(fy[0], normal::pdf(y)) < 1e-12);
        assert!(rel(fy[1], -y * normal::pdf(y)) < 1e-6);
    }

    #[test]
    fn finite_differences_match_exponential() {
        for &x in &[0.05, 0.5, 1.0, 5.0] {
            let a = DensityDerivatives::exponential(x);
            let b = DensityDerivatives::from_fn(x, |u| (-u).exp()).unwrap();
            for k in 0..5 {
                assert!(
                    rel(b.d[k], a.d[k]) < 1e-4,
                    "x={x} k={k}: {} vs {}",
                    b.d[k],
                    a.d[k]
                );
            }
        }
        assert!(DensityDerivatives::from_fn(0.0, |u| u).is_err());
    }

    #[test]
    fn variance_factors() {
        let g = Kernel::Gaussian;
        let d = DensityDerivatives::exponential(0.5);
        let nu0 = 1.0 / (2.0 * std::f64::consts::PI.sqrt());
        let v = variance_factor(0.5, Transformation::Log, &d, 1, g, BandwidthMode::Fixed).unwrap();
        assert!(rel(v, nu0 * d.d[0] / 0.5) < 1e-12);
        let v2 = variance_factor(0.5, Transformation::Log, &d, 2, g, BandwidthMode::Fixed).unwrap();
        assert!(rel(v2 / v, 27.0 / 16.0) < 1e-10);
        let d0 = DensityDerivatives::exponential(0.01);
        let nn = variance_factor(
            0.01,
            Transformation::Probex,
            &d0,
            2,
            g,
            BandwidthMode::NearestNeighbour,
        )
        .unwrap();
        assert!(rel(nn, 2.0 * nu0 * 27.0 / 16.0 * (-0.02f64).exp()) < 1e-10);
        assert!(variance_factor(1.0, Transformation::Log, &d, 3, g, BandwidthMode::Fixed).is_err());
        assert!(
            rel(
                variance_function(0.5, Transformation::Log, &d).unwrap(),
                d.d[0] / 0.5
            ) < 1e-15
        );
    }

    #[test]
    fn zero_density_rejected() {
        let d = DensityDerivatives::new(1.0, [0.0, 1.0, 1.0, 1.0, 1.0]);
        assert!(bias_loclin(1.0, Transformation::Log, &d).is_err());
        assert!(bias_locquad(1.0, Transformation::Log, &d).is_err());
        assert!(bias_naive(1.0, Transformation::Log, &d).is_ok());
    }
}
