//! Standard normal density, distribution and quantile functions, including
//! log-domain variants that stay finite far into the tails.

use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// `φ(z)`.
#[inline]
pub fn pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

#[inline]
pub fn ln_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// `Φ(z)`, accurate in relative terms for negative `z`.
#[inline]
pub fn cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// `1 - Φ(z)`, accurate in relative terms for positive `z`.
#[inline]
pub fn sf(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

/// `ln Φ(z)` for all finite `z`.
pub fn ln_cdf(z: f64) -> f64 {
    if z > 0.0 {
        (-sf(z)).ln_1p()
    } else if z > -37.0 {
        cdf(z).ln()
    } else {
        // Mills-ratio asymptotic series; |terms| < 2e-15 beyond z = -37.
        let r = 1.0 / (z * z);
        let series = 1.0
            - r * (1.0
                - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r * (1.0 - 9.0 * r * (1.0 - 11.0 * r)))));
        ln_pdf(z) - (-z).ln() + series.ln()
    }
}

const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const P_LOW: f64 = 0.02425;

/// Acklam's rational approximation for the lower tail, as a function of
/// `q = sqrt(-2 ln p)`.
#[inline]
fn acklam_tail(q: f64) -> f64 {
    (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
        / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
}

fn acklam(p: f64) -> f64 {
    if p < P_LOW {
        acklam_tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -acklam_tail((-2.0 * (1.0 - p).ln()).sqrt())
    }
}

/// `Φ⁻¹(p)` for `p ∈ (0, 1)`: Acklam's approximation followed by two Halley
/// corrections, which brings the relative error to a few ulps.
///
/// Returns `-∞`/`+∞` at `p = 0`/`p = 1` and NaN outside `[0, 1]`.
pub fn quantile(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let mut x = acklam(p);
    for _ in 0..2 {
        // Φ(x) - p, evaluated on the side where it keeps relative accuracy.
        let e = if x <= 0.0 {
            cdf(x) - p
        } else {
            (1.0 - p) - sf(x)
        };
        let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
        if !u.is_finite() {
            break;
        }
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// `Φ⁻¹(exp(ln_p))` for `ln_p <= ln(1/2)`, usable when `exp(ln_p)`
/// underflows.
pub fn quantile_from_ln(ln_p: f64) -> f64 {
    if ln_p > -700.0 {
        return quantile(ln_p.exp());
    }
    let mut x = acklam_tail((-2.0 * ln_p).sqrt());
    for _ in 0..4 {
        let g = ln_cdf(x) - ln_p;
        // d/dx ln Φ(x) = φ(x)/Φ(x)
        let slope = (ln_pdf(x) - ln_cdf(x)).exp();
        x -= g / slope;
    }
    x
}
