//! Generalized-F test densities on `(0, ∞)`.
//!
//! With `u = (x/β)^s` the density is
//!
//! ```text
//! f(x) = s u^{m₁} / (x B(m₁, m₂)) · (1 + u)^{−(m₁+m₂)}
//! ```
//!
//! (the GB2 form). Letting `m₂ → ∞` with `β` rescaled by `m₂^{1/s}` gives the
//! generalized gamma `f(x) = s u^{m₁} e^{−u} / (x Γ(m₁))`, represented here by
//! `m2 = None`; it contains the exponential (`m₁ = s = 1`), Gamma and Weibull
//! laws.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenFParams {
    pub m1: f64,
    /// `None` selects the generalized-gamma limit.
    #[serde(default)]
    pub m2: Option<f64>,
    pub s: f64,
    pub beta: f64,
}

/// Shape parameters `(m₁, m₂, s)` of the seven benchmark densities; the
/// scale is fixed by the unit-mean constraint.
///
/// 1. standard exponential;
/// 2. beta-prime type, unbounded at 0 with a heavy right tail;
/// 3. generalized gamma vanishing at 0;
/// 4. Gamma, vanishing at 0;
/// 5. `exp(−(x/β)^s)` type with `f(0) > 0`;
/// 6. near log-normal (large `m₁ = m₂`);
/// 7. Weibull with a very light right tail.
///
/// Free shape parameters were set so that each density has mean 1 and
/// 90% quantile 2.303, 0.560, 1.393, 1.489, 2.151, 2.235 and 1.648
/// respectively.
const PRESETS: [(f64, Option<f64>, f64); 7] = [
    (1.0, None, 1.0),
    (0.5, Some(1.078_074_467_308_589_4), 1.0),
    (3.0, None, 1.976_802_487_440_438_8),
    (7.444_222_993_133_442, None, 1.0),
    (0.661_398_475_387_009, None, 1.0 / 0.661_398_475_387_009),
    (50.0, Some(50.0), 0.180_419_372_528_289_13),
    (1.0, None, 2.205_796_610_220_224_4),
];

impl GenFParams {
    pub fn gb2(m1: f64, m2: f64, s: f64, beta: f64) -> Result<Self> {
        let p = Self {
            m1,
            m2: Some(m2),
            s,
            beta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn generalized_gamma(m1: f64, s: f64, beta: f64) -> Result<Self> {
        let p = Self {
            m1,
            m2: None,
            s,
            beta,
        };
        p.validate()?;
        Ok(p)
    }

    /// Benchmark density `id ∈ 1..=7`, scaled to mean 1.
    pub fn preset(id: usize) -> Result<Self> {
        let (m1, m2, s) = *PRESETS
            .get(id.wrapping_sub(1))
            .ok_or_else(|| Error::invalid(format!("preset must be in 1..=7, got {id}")))?;
        Self {
            m1,
            m2,
            s,
            beta: 1.0,
        }
        .with_unit_mean()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !(ok(self.m1) && ok(self.s) && ok(self.beta) && self.m2.is_none_or(ok)) {
            return Err(Error::invalid(format!(
                "generalized-F parameters must be positive and finite: {self:?}"
            )));
        }
        Ok(())
    }

    /// `E X`, infinite when `s m₂ ≤ 1`.
    pub fn mean(&self) -> f64 {
        let inv = 1.0 / self.s;
        match self.m2 {
            None => self.beta * (ln_gamma(self.m1 + inv) - ln_gamma(self.m1)).exp(),
            Some(m2) if m2 > inv => {
                self.beta * (ln_beta(self.m1 + inv, m2 - inv) - ln_beta(self.m1, m2)).exp()
            }
            Some(_) => f64::INFINITY,
        }
    }

    /// Same shape, scale chosen so that the mean is 1.
    pub fn with_unit_mean(self) -> Result<Self> {
        self.validate()?;
        let m = Self { beta: 1.0, ..self }.mean();
        if !m.is_finite() {
            return Err(Error::invalid("distribution has no finite mean"));
        }
        Ok(Self {
            beta: 1.0 / m,
            ..self
        })
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return f64::NEG_INFINITY;
        }
        let ln_u = self.s * (x / self.beta).ln();
        let core = self.s.ln() + self.m1 * ln_u - x.ln();
        match self.m2 {
            None => core - ln_u.exp() - ln_gamma(self.m1),
            Some(m2) => core - (self.m1 + m2) * ln_1p_exp(ln_u) - ln_beta(self.m1, m2),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        let u = (x / self.beta).powf(self.s);
        match self.m2 {
            None => gamma_lr(self.m1, u),
            Some(m2) => {
                let z = u / (1.0 + u);
                if z <= 0.5 {
                    beta_reg(self.m1, m2, z)
                } else {
                    1.0 - beta_reg(m2, self.m1, 1.0 / (1.0 + u))
                }
            }
        }
    }

    /// `1 − F(x)` without cancellation in the right tail.
    pub fn sf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 1.0;
        }
        let u = (x / self.beta).powf(self.s);
        match self.m2 {
            None => gamma_ur(self.m1, u),
            Some(m2) => {
                let z = u / (1.0 + u);
                if z <= 0.5 {
                    1.0 - beta_reg(self.m1, m2, z)
                } else {
                    beta_reg(m2, self.m1, 1.0 / (1.0 + u))
                }
            }
        }
    }

    /// `F⁻¹(p)` by bisection on a bracket grown by doubling from `1e-12`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!(
                "quantile level must be in (0, 1), got {p}"
            )));
        }
        let mut lo = 1e-12;
        if self.cdf(lo) >= p {
            // Bisect on a log scale below the default bracket.
            let mut a = f64::MIN_POSITIVE;
            let mut b = lo;
            for _ in 0..200 {
                let mid = (a * b).sqrt();
                if self.cdf(mid) < p {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            return Ok(b);
        }
        let mut hi = 1.0;
        while self.cdf(hi) < p {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::Numerical(format!(
                    "no quantile bracket found for p = {p}"
                )));
            }
        }
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * hi {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `n` draws from a seeded ChaCha8 generator.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(n, &mut rng)
    }

    /// Exact construction: `β G^{1/s}` with `G ~ Gamma(m₁)` for the
    /// generalized gamma, `β (G₁/G₂)^{1/s}` with independent
    /// `G_i ~ Gamma(m_i)` for the GB2.
    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let g1 = Gamma::new(self.m1, 1.0).expect("validated shape");
        let g2 = self
            .m2
            .map(|m2| Gamma::new(m2, 1.0).expect("validated shape"));
        let inv = 1.0 / self.s;
        (0..n)
            .map(|_| {
                let a: f64 = g1.sample(rng);
                let ratio = match &g2 {
                    None => a,
                    Some(g) => a / g.sample(rng),
                };
                self.beta * ratio.powf(inv)
            })
            .collect()
    }
}

/// `ln(1 + e^t)` without overflow.
fn ln_1p_exp(t: f64) -> f64 {
    if t > 35.0 {
        t + (-t).exp()
    } else {
        t.exp().ln_1p()
    }
}

/// Named density used in benchmark configurations: `"density-3"` or a
/// custom parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DensitySpec {
    Preset(#[serde(with = "preset_id")] usize),
    Custom(GenFParams),
}

impl DensitySpec {
    pub fn params(&self) -> Result<GenFParams> {
        match *self {
            DensitySpec::Preset(i) => GenFParams::preset(i),
            DensitySpec::Custom(p) => {
                p.validate()?;
                Ok(p)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            DensitySpec::Preset(i) => format!("density-{i}"),
            DensitySpec::Custom(p) => match p.m2 {
                Some(m2) => format!("gb2({},{},{},{})", p.m1, m2, p.s, p.beta),
                None => format!("gg({},{},{})", p.m1, p.s, p.beta),
            },
        }
    }
}

impl fmt::Display for DensitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for DensitySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let id = parse_preset_id(s)?;
        GenFParams::preset(id)?;
        Ok(DensitySpec::Preset(id))
    }
}

fn parse_preset_id(s: &str) -> Result<usize> {
    s.strip_prefix("density-")
        .and_then(|d| d.parse().ok())
        .filter(|i| (1..=7).contains(i))
        .ok_or_else(|| Error::unknown("density preset", s))
}

mod preset_id {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(id: &usize, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("density-{id}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<usize, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_preset_id(&s).map_err(D::Error::custom)
    }
}
