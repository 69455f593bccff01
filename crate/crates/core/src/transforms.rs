//! Smooth increasing maps `T: (0, ∞) → ℝ` with `T(0⁺) = −∞` and
//! `T(∞) = +∞`, together with their inverse and first five derivatives.

use crate::error::{Error, Result};
use crate::normal;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transformation {
    Log,
    /// `T(x) = Φ⁻¹(1 − e^{−x})`, which maps Exp(1) onto N(0, 1).
    Probex,
}

/// `T(x) = ln x`.
pub fn log_transform(x: f64) -> Result<f64> {
    check_positive(x)?;
    Ok(x.ln())
}

/// `T(x) = Φ⁻¹(1 − e^{−x})`.
///
/// The right tail is evaluated as `−Φ⁻¹(e^{−x})` in the log domain, so the
/// result stays finite and increasing for any finite `x`.
pub fn probex(x: f64) -> Result<f64> {
    check_positive(x)?;
    Ok(probex_unchecked(x))
}

#[inline]
fn probex_unchecked(x: f64) -> f64 {
    if x < std::f64::consts::LN_2 {
        normal::quantile(-(-x).exp_m1())
    } else {
        -normal::quantile_from_ln(-x)
    }
}

/// Ratio of the probex derivative to the log derivative,
/// `x e^{−x} / φ(Φ⁻¹(1 − e^{−x}))`. Below one on `(0, 1)` and vanishing at
/// the origin.
pub fn variance_ratio(x: f64) -> Result<f64> {
    check_positive(x)?;
    Ok(x * probex_derivatives(x)[0])
}

fn check_positive(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "transformation requires 0 < x < ∞, got {x}"
        )))
    }
}

/// `[T', T'', T''', T'''', T''''']` for probex.
///
/// With `z = T(x)`, `ln T' = −x + z²/2 + ln √(2π)`. Writing `g = ln T'` and
/// `u = T'`, the derivatives follow from `u' = u g'` by Leibniz' rule, and
/// `g' = −1 + z u` differentiates in closed form.
fn probex_derivatives(x: f64) -> [f64; 5] {
    let z = probex_unchecked(x);
    let u0 = (-x + 0.5 * z * z + 0.918_938_533_204_672_7).exp();
    let g1 = -1.0 + z * u0;
    let u1 = u0 * g1;
    let g2 = u0 * u0 + z * u1;
    let u2 = u1 * g1 + u0 * g2;
    let g3 = 3.0 * u0 * u1 + z * u2;
    let u3 = u2 * g1 + 2.0 * u1 * g2 + u0 * g3;
    let g4 = 3.0 * u1 * u1 + 4.0 * u0 * u2 + z * u3;
    let u4 = u3 * g1 + 3.0 * u2 * g2 + 3.0 * u1 * g3 + u0 * g4;
    [u0, u1, u2, u3, u4]
}

fn log_derivatives(x: f64) -> [f64; 5] {
    let r = 1.0 / x;
    let r2 = r * r;
    [r, -r2, 2.0 * r2 * r, -6.0 * r2 * r2, 24.0 * r2 * r2 * r]
}

impl Transformation {
    pub fn forward(self, x: f64) -> Result<f64> {
        match self {
            Transformation::Log => log_transform(x),
            Transformation::Probex => probex(x),
        }
    }

    /// `T⁻¹(y)`, defined for every real `y`.
    pub fn inverse(self, y: f64) -> f64 {
        match self {
            Transformation::Log => y.exp(),
            Transformation::Probex => {
                // x = −ln(1 − Φ(y))
                if y < 0.0 {
                    -(-normal::cdf(y)).ln_1p()
                } else {
                    -normal::ln_cdf(-y)
                }
            }
        }
    }

    /// `T^{(order)}(x)` for `order ∈ 1..=5`.
    pub fn derivative(self, order: usize, x: f64) -> Result<f64> {
        if !(1..=5).contains(&order) {
            return Err(Error::invalid(format!(
                "derivative order must be in 1..=5, got {order}"
            )));
        }
        Ok(self.derivatives(x)?[order - 1])
    }

    /// All five derivatives `[T', …, T^{(5)}]` at `x`.
    pub fn derivatives(self, x: f64) -> Result<[f64; 5]> {
        check_positive(x)?;
        Ok(match self {
            Transformation::Log => log_derivatives(x),
            Transformation::Probex => probex_derivatives(x),
        })
    }

    /// `T'(x)` without the full derivative stack.
    pub fn jacobian(self, x: f64) -> Result<f64> {
        check_positive(x)?;
        Ok(match self {
            Transformation::Log => 1.0 / x,
            Transformation::Probex => {
                let z = probex_unchecked(x);
                (-x + 0.5 * z * z + 0.918_938_533_204_672_7).exp()
            }
        })
    }

    pub fn id(self) -> &'static str {
        match self {
            Transformation::Log => "log",
            Transformation::Probex => "probex",
        }
    }
}

impl fmt::Display for Transformation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Transformation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "log" => Ok(Transformation::Log),
            "probex" => Ok(Transformation::Probex),
            _ => Err(Error::unknown("transformation", s)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::linspace;

    const BOTH: [Transformation; 2] = [Transformation::Log, Transformation::Probex];

    #[test]
    fn probex_known_points() {
        assert!(probex(std::f64::consts::LN_2).unwrap().abs() < 1e-15);
        // Independent oracle: bisection on 1 − e^{−x} = Φ(1).
        let target = normal::cdf(1.0);
        let (mut lo, mut hi) = (0.1f64, 5.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if -(-mid).exp_m1() < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - 1.841_02).abs() < 1e-5);
        assert!((probex(lo).unwrap() - 1.0).abs() < 1e-9);
        // Small x: compare to the quantile of the exactly computed probability.
        let p = -(-0.001f64).exp_m1();
        let z = probex(0.001).unwrap();
        assert!(z < -3.0);
        assert!((normal::cdf(z) - p).abs() < 1e-12 * p);
    }

    #[test]
    fn log_known_points() {
        assert_eq!(log_transform(1.0).unwrap(), 0.0);
        assert!((log_transform(std::f64::consts::E).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(Transformation::Log.derivative(1, 0.5).unwrap(), 2.0);
    }

    #[test]
    fn domain_errors() {
        for t in BOTH {
            assert!(matches!(t.forward(0.0), Err(Error::Domain(_))));
            assert!(matches!(t.forward(-1.0), Err(Error::Domain(_))));
            assert!(t.derivatives(0.0).is_err());
        }
        assert!(Transformation::Log.derivative(6, 1.0).is_err());
    }

    #[test]
    fn far_right_tail_is_finite_and_increasing() {
        let xs = [30.0, 37.0, 38.0, 100.0, 700.0, 800.0, 5000.0];
        let ys: Vec<f64> = xs.iter().map(|&x| probex(x).unwrap()).collect();
        assert!(ys.iter().all(|y| y.is_finite()));
        assert!(ys.windows(2).all(|w| w[1] > w[0]), "{ys:?}");
    }

    #[test]
    fn round_trip_inverse() {
        for t in BOTH {
            for y in linspace(-8.0, 8.0, 321) {
                let x = t.inverse(y);
                let back = t.forward(x).unwrap();
                assert!((back - y).abs() < 1e-9, "{t}: y={y} back={back}");
            }
        }
    }

    #[test]
    fn strictly_increasing_with_positive_slope() {
        for t in BOTH {
            let xs = linspace(1e-4, 20.0, 2000);
            let ys: Vec<f64> = xs.iter().map(|&x| t.forward(x).unwrap()).collect();
            assert!(ys.windows(2).all(|w| w[1] > w[0]));
            assert!(xs.iter().all(|&x| t.jacobian(x).unwrap() > 0.0));
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        // Central differences of the (j−1)th derivative against the jth.
        for t in BOTH {
            for x in linspace(0.05, 10.0, 60) {
                let d = t.derivatives(x).unwrap();
                let h = 1e-5 * x.max(1.0);
                let fd1 = (t.forward(x + h).unwrap() - t.forward(x - h).unwrap()) / (2.0 * h);
                assert!(((fd1 - d[0]) / d[0]).abs() < 1e-5, "{t} x={x} T'");
                for j in 1..5 {
                    let hp = t.derivatives(x + h).unwrap()[j - 1];
                    let hm = t.derivatives(x - h).unwrap()[j - 1];
                    let fd = (hp - hm) / (2.0 * h);
                    let scale = d[j].abs().max(1e-8);
                    assert!(
                        ((fd - d[j]) / scale).abs() < 1e-5,
                        "{t} x={x} order {} fd={fd} an={}",
                        j + 1,
                        d[j]
                    );
                }
            }
        }
    }

    #[test]
    fn probex_derivatives_match_closed_form_differences() {
        // Nested differences of the closed form itself on [0.1, 5]: step
        // sizes grow with the order to keep round-off below the tolerance.
        let t = Transformation::Probex;
        let f = |x: f64| probex(x).unwrap();
        for x in linspace(0.1, 5.0, 25) {
            let d = t.derivatives(x).unwrap();
            let h = 1e-2 * x.min(1.0);
            // Five-point stencils, O(h⁴) for orders 1–2 and O(h²) beyond.
            let f_m2 = f(x - 2.0 * h);
            let f_m1 = f(x - h);
            let f_0 = f(x);
            let f_p1 = f(x + h);
            let f_p2 = f(x + 2.0 * h);
            let d1 = (f_m2 - 8.0 * f_m1 + 8.0 * f_p1 - f_p2) / (12.0 * h);
            let d2 = (-f_m2 + 16.0 * f_m1 - 30.0 * f_0 + 16.0 * f_p1 - f_p2) / (12.0 * h * h);
            assert!(((d1 - d[0]) / d[0]).abs() < 1e-4, "x={x}");
            assert!(((d2 - d[1]) / d[1].abs().max(1e-3)).abs() < 1e-4, "x={x}");
            // Orders 3..5 from central differences of the analytic lower order.
            let hh = 1e-4 * x.max(1.0);
            for j in 2..5 {
                let fd = (t.derivatives(x + hh).unwrap()[j - 1]
                    - t.derivatives(x - hh).unwrap()[j - 1])
                    / (2.0 * hh);
                assert!(
                    ((fd - d[j]) / d[j].abs().max(1e-3)).abs() < 1e-4,
                    "x={x} order {}",
                    j + 1
                );
            }
        }
    }

    #[test]
    fn log_cancellation_identities() {
        let t = Transformation::Log;
        for x in linspace(0.01, 50.0, 200) {
            let [t1, t2, t3, _, _] = t.derivatives(x).unwrap();
            let lin = 2.0 * t2 * t2 - t1 * t3;
            assert!(lin.abs() <= 1e-12 * (2.0 * t2 * t2).abs());
            let naive = 3.0 * t2 * t2 / t1.powi(4) - t3 / t1.powi(3);
            assert!((naive - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn variance_ratio_behaviour() {
        let r = variance_ratio(0.5).unwrap();
        assert!(r > 0.0 && r < 1.0);
        // Vanishes like 1/|Φ⁻¹(x)|, i.e. very slowly.
        assert!(variance_ratio(1e-4).unwrap() < 0.3);
        assert!(variance_ratio(1e-100).unwrap() < 0.05);
        assert!(variance_ratio(1e-100).unwrap() < variance_ratio(1e-4).unwrap());
        let oracle = std::f64::consts::LN_2 / 2.0 * (2.0 * std::f64::consts::PI).sqrt();
        assert!((variance_ratio(std::f64::consts::LN_2).unwrap() - oracle).abs() < 1e-12);
        assert!((oracle - 0.868_73).abs() < 1e-5);
        for x in linspace(0.001, 0.999, 200) {
            assert!(variance_ratio(x).unwrap() < 1.0);
        }
    }
}
