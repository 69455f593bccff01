//! Symmetric unit-variance kernels and their moment constants.
//!
//! `μ_j = ∫ u^j K(u) du` and `ν_j = ∫ u^j K(u)² du`. Both kernels are scaled
//! so that `μ_2 = 1`, which keeps bandwidths comparable across kernels.

use crate::error::Error;
use crate::normal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

const SQRT_5: f64 = 2.236_067_977_499_79;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    #[default]
    Gaussian,
    /// Epanechnikov kernel rescaled to unit variance, supported on `|u| <= √5`.
    Epanechnikov,
}

/// Kernel moment constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelMoments {
    /// `μ_0 ..= μ_6`
    pub mu: [f64; 7],
    /// `ν_0 ..= ν_4`
    pub nu: [f64; 5],
}

impl KernelMoments {
    /// `(μ_4² ν_0 − 2 μ_2 μ_4 ν_2 + μ_2² ν_4) / (μ_4 − μ_2²)²`, the variance
    /// constant of the local log-quadratic fit.
    pub fn v2(&self) -> f64 {
        let [_, _, m2, _, m4, _, _] = self.mu;
        let [n0, _, n2, _, n4] = self.nu;
        (m4 * m4 * n0 - 2.0 * m2 * m4 * n2 + m2 * m2 * n4) / ((m4 - m2 * m2) * (m4 - m2 * m2))
    }

    /// `V_2 / V_1`: the factor by which the log-quadratic fit inflates the
    /// variance of the log-linear (or raw kernel) fit. Equals 27/16 for the
    /// Gaussian kernel.
    pub fn v2_inflation(&self) -> f64 {
        self.v2() / self.nu[0]
    }

    /// Variance constant for a local fit of degree `p`: `ν_0` for `p <= 1`
    /// (the raw kernel estimator shares it), `V_2` for `p = 2`.
    pub fn variance_constant(&self, degree: usize) -> f64 {
        if degree <= 1 {
            self.nu[0]
        } else {
            self.v2()
        }
    }

    /// `(μ_2 μ_6 − μ_4²) / (μ_4 − μ_2²)`, the kernel factor in the
    /// log-quadratic bias.
    pub fn quadratic_bias_constant(&self) -> f64 {
        let [_, _, m2, _, m4, _, m6] = self.mu;
        (m2 * m6 - m4 * m4) / (m4 - m2 * m2)
    }
}

impl Kernel {
    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Gaussian => normal::pdf(u),
            Kernel::Epanechnikov => {
                if u.abs() <= SQRT_5 {
                    0.75 / SQRT_5 * (1.0 - u * u / 5.0)
                } else {
                    0.0
                }
            }
        }
    }

    /// Half-width of the support, `None` for unbounded support.
    pub fn support(self) -> Option<f64> {
        match self {
            Kernel::Gaussian => None,
            Kernel::Epanechnikov => Some(SQRT_5),
        }
    }

    pub fn moments(self) -> KernelMoments {
        match self {
            Kernel::Gaussian => {
                let r = 1.0 / (2.0 * PI.sqrt());
                KernelMoments {
                    mu: [1.0, 0.0, 1.0, 0.0, 3.0, 0.0, 15.0],
                    nu: [r, 0.0, 0.5 * r, 0.0, 0.75 * r],
                }
            }
            Kernel::Epanechnikov => KernelMoments {
                mu: [1.0, 0.0, 1.0, 0.0, 15.0 / 7.0, 0.0, 125.0 / 21.0],
                nu: [
                    3.0 / (5.0 * SQRT_5),
                    0.0,
                    3.0 * SQRT_5 / 35.0,
                    0.0,
                    SQRT_5 / 7.0,
                ],
            },
        }
    }

    /// Partial moment `W_j(c) = ∫_{-c}^{∞} u^j K(u) du` for `j ∈ {0, 1, 2}`.
    pub fn partial_moment(self, j: usize, c: f64) -> f64 {
        assert!(j <= 2, "partial moments are only provided up to order 2");
        match self {
            Kernel::Gaussian => match j {
                0 => normal::cdf(c),
                1 => normal::pdf(c),
                _ => normal::cdf(c) - c * normal::pdf(c),
            },
            Kernel::Epanechnikov => {
                if c <= -SQRT_5 {
                    return 0.0;
                }
                let lo = (-c).max(-SQRT_5);
                let k = 0.75 / SQRT_5;
                let jf = j as i32;
                let anti = |u: f64| {
                    k * (u.powi(jf + 1) / (jf + 1) as f64
                        - u.powi(jf + 3) / (5.0 * (jf + 3) as f64))
                };
                anti(SQRT_5) - anti(lo)
            }
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            Kernel::Gaussian => "gaussian",
            Kernel::Epanechnikov => "epanechnikov",
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Kernel::Gaussian),
            "epanechnikov" | "epan" => Ok(Kernel::Epanechnikov),
            _ => Err(Error::unknown("kernel", s)),
        }
    }
}
