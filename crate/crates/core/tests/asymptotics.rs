//! Monte Carlo checks of the leading bias and variance terms.

use lltkde::asymptotics::{
    bias_loclin, bias_naive, variance_factor, BandwidthMode, DensityDerivatives,
};
use lltkde::genf::GenFParams;
use lltkde::tkde::{estimate, TkdeConfig, TransformedFit};
use lltkde::{Kernel, SmoothingSpec, Transformation};
use rayon::prelude::*;

const N: usize = 5000;
const REPS: usize = 400;
const H: f64 = 0.3;
// Variance is checked at a small bandwidth: the O(h) correction `−f_Y²/n` is
// a third of the leading term at h = 0.3.
const H_VAR: f64 = 0.05;

struct McStats {
    mean: f64,
    var: f64,
}

fn monte_carlo(points: &[f64], fit: TransformedFit, h: f64) -> Vec<McStats> {
    let exp1 = GenFParams::preset(1).unwrap();
    let config = TkdeConfig {
        transformation: Transformation::Log,
        fit,
        kernel: Kernel::Gaussian,
        smoothing: SmoothingSpec::FixedH(h),
        renormalize: false,
    };
    let runs: Vec<Vec<f64>> = (0..REPS)
        .into_par_iter()
        .map(|r| {
            let sample = exp1.sample(N, 7_000 + r as u64);
            estimate(points, &sample, &config).unwrap().values
        })
        .collect();
    (0..points.len())
        .map(|i| {
            let vals: Vec<f64> = runs.iter().map(|v| v[i]).collect();
            let mean = vals.iter().sum::<f64>() / REPS as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (REPS - 1) as f64;
            McStats { mean, var }
        })
        .collect()
}

fn check_bias(label: &str, observed: f64, predicted: f64) {
    assert!(
        observed.signum() == predicted.signum()
            && observed / predicted > 0.5
            && observed / predicted < 2.0,
        "{label}: observed bias {observed:.5}, predicted {predicted:.5}"
    );
}

#[test]
fn local_linear_log_bias_and_variance() {
    let points = [0.5, 1.0];
    let stats = monte_carlo(&points, TransformedFit::Local(1), H);
    let mu2 = Kernel::Gaussian.moments().mu[2];
    for (x, s) in points.iter().zip(&stats) {
        let d = DensityDerivatives::exponential(*x);
        let predicted = 0.5 * mu2 * H * H * bias_loclin(*x, Transformation::Log, &d).unwrap();
        check_bias(&format!("loclin x={x}"), s.mean - (-x).exp(), predicted);
    }
    let stats = monte_carlo(&points, TransformedFit::Local(1), H_VAR);
    for (x, s) in points.iter().zip(&stats) {
        let d = DensityDerivatives::exponential(*x);
        let v = variance_factor(
            *x,
            Transformation::Log,
            &d,
            1,
            Kernel::Gaussian,
            BandwidthMode::Fixed,
        )
        .unwrap();
        let ratio = s.var / (v / (N as f64 * H_VAR));
        assert!(
            (0.8..1.2).contains(&ratio),
            "x={x}: variance ratio {ratio:.3}"
        );
    }
}

#[test]
fn naive_log_bias_matches_leading_term() {
    let points = [0.5, 1.0];
    let stats = monte_carlo(&points, TransformedFit::Naive, H);
    let mu2 = Kernel::Gaussian.moments().mu[2];
    for (x, s) in points.iter().zip(&stats) {
        let d = DensityDerivatives::exponential(*x);
        let predicted = 0.5 * mu2 * H * H * bias_naive(*x, Transformation::Log, &d).unwrap();
        check_bias(&format!("naive x={x}"), s.mean - (-x).exp(), predicted);
    }
}
