use crate::error::{CliError, CliResult, Context};
use crate::ingest::{ingest, rescale_to_unit_mean, Ingested};
use crate::manifest::{write_output, RunManifest};
use crate::{
    AsymptoticsArgs, BenchArgs, Choice, EstimateArgs, Format, InputArgs, SampleArgs, ScanArgs,
};
use lltkde::asymptotics::{asymptotic_row, DensityDerivatives};
use lltkde::bandwidth::{
    self, argmin_score, default_alpha_grid, default_h_grid, gamma_reference_bandwidth,
    plugin_bandwidth,
};
use lltkde::bench::{emit_tables, run_benchmark, BenchConfig, BenchEstimator, TableFormat};
use lltkde::competitors::{self, CompetitorConfig};
use lltkde::genf::DensitySpec;
use lltkde::quadrature::linspace;
use lltkde::tkde::{self, TkdeConfig, TransformedFit};
use lltkde::{stats, DensityEstimate, SmoothingSpec, Transformation};
use serde_json::json;
use std::fmt::Write as _;
use std::path::Path;

struct Prepared {
    data: Ingested,
    sample: Vec<f64>,
    scale: f64,
    rescaled: bool,
}

fn prepare(input: &InputArgs, rescale_default: bool) -> CliResult<Prepared> {
    let data = ingest(
        &input.input,
        input.column.as_deref(),
        input.drop_nonpositive,
    )?;
    let rescaled = input.rescale(rescale_default);
    let (sample, scale) = if rescaled {
        rescale_to_unit_mean(&data.values)
    } else {
        (data.values.clone(), 1.0)
    };
    log::info!("{} observations from {}", sample.len(), data.path);
    Ok(Prepared {
        data,
        sample,
        scale,
        rescaled,
    })
}

fn transformed(sample: &[f64], t: Transformation) -> CliResult<Vec<f64>> {
    sample
        .iter()
        .map(|&x| t.forward(x))
        .collect::<lltkde::Result<Vec<f64>>>()
        .context("transforming the data")
}

fn scores_json(scores: &[(SmoothingSpec, f64)], selected: usize) -> serde_json::Value {
    scores
        .iter()
        .enumerate()
        .map(|(i, (c, s))| json!({ "candidate": c, "score": s, "selected": i == selected }))
        .collect()
}

/// Smoothing chosen for a local-likelihood estimator, with the LSCV scan if
/// one was run.
type Selection = (
    SmoothingSpec,
    &'static str,
    Option<(Vec<(SmoothingSpec, f64)>, usize)>,
);

fn select_local(a: &EstimateArgs, ys: &[f64]) -> CliResult<Selection> {
    let degree = usize::from(a.degree);
    let scan = |candidates: Vec<SmoothingSpec>| -> CliResult<Selection> {
        let scores =
            bandwidth::lscv_scan(ys, &candidates, degree, a.kernel).context("cross-validation")?;
        let best = argmin_score(&scores).ok_or_else(|| {
            CliError::Numerical("cross-validation: no candidate has a finite score".into())
        })?;
        Ok((scores[best].0, "lscv", Some((scores, best))))
    };
    if a.alpha_grid.is_some() && !matches!((a.alpha, a.h), (None | Some(Choice::Auto), None)) {
        return Err(CliError::Usage(
            "--alpha-grid applies only with --alpha auto".into(),
        ));
    }
    match (a.alpha, a.h) {
        (Some(_), Some(_)) => Err(CliError::Usage(
            "give either --alpha or --h, not both".into(),
        )),
        (Some(Choice::Value(v)), None) => {
            let s = SmoothingSpec::NnFraction(v);
            s.validate()?;
            Ok((s, "fixed", None))
        }
        (None, Some(Choice::Value(h))) => Ok((SmoothingSpec::FixedH(h), "fixed", None)),
        (None, Some(Choice::Auto)) => scan(default_h_grid(ys).context("bandwidth grid")?),
        (None | Some(Choice::Auto), None) => {
            let candidates = match &a.alpha_grid {
                Some(g) => g.iter().map(|&v| SmoothingSpec::NnFraction(v)).collect(),
                None => default_alpha_grid(),
            };
            scan(candidates)
        }
    }
}

fn renormalizes_by_default(e: BenchEstimator) -> bool {
    // The naive log, reflection and cut-and-normalise estimators integrate
    // to one already.
    !matches!(
        e,
        BenchEstimator::NaiveLog | BenchEstimator::Reflection | BenchEstimator::CutAndNormalise
    )
}

pub fn estimate(
    a: &EstimateArgs,
    format: Format,
    out: Option<&Path>,
    seed: Option<u64>,
) -> CliResult<()> {
    if a.grid_points < 2 {
        return Err(CliError::Usage("--grid-points must be at least 2".into()));
    }
    let p = prepare(&a.input, a.estimator == BenchEstimator::LocalProbex)?;
    let sample = &p.sample;
    let q = stats::quantile_sorted(&stats::sorted(sample), 0.999);
    if !(q > 0.001) {
        return Err(CliError::Data(format!(
            "99.9% quantile {q} of the (rescaled) data does not exceed the grid start 0.001"
        )));
    }
    let grid = linspace(0.001, q, a.grid_points);
    let renormalize = !a.no_renormalize && renormalizes_by_default(a.estimator);
    let degree = usize::from(a.degree);

    let (est, rule, scan): (DensityEstimate, &str, _) = match a.estimator {
        BenchEstimator::LocalLog | BenchEstimator::LocalProbex => {
            let t = if a.estimator == BenchEstimator::LocalLog {
                Transformation::Log
            } else {
                Transformation::Probex
            };
            let ys = transformed(sample, t)?;
            let (smoothing, rule, scan) = select_local(a, &ys)?;
            let config = TkdeConfig {
                transformation: t,
                fit: TransformedFit::Local(degree),
                kernel: a.kernel,
                smoothing,
                renormalize,
            };
            let est = tkde::estimate(&grid, sample, &config).context("estimating the density")?;
            (est, rule, scan)
        }
        other => {
            if a.alpha.is_some() || a.alpha_grid.is_some() {
                return Err(CliError::Usage(format!(
                    "--alpha does not apply to {other}"
                )));
            }
            let (h, rule) = match (a.h, other.competitor()) {
                (Some(Choice::Value(h)), _) => (h, "fixed"),
                (_, None) => {
                    let logs = transformed(sample, Transformation::Log)?;
                    (
                        plugin_bandwidth(&logs).context("plug-in bandwidth")?,
                        "plugin",
                    )
                }
                (_, Some(c)) if c.is_gamma() => (
                    gamma_reference_bandwidth(sample).context("Gamma reference bandwidth")?,
                    "gamma-reference",
                ),
                (_, Some(_)) => (
                    plugin_bandwidth(sample).context("plug-in bandwidth")?,
                    "plugin",
                ),
            };
            let est = match other.competitor() {
                None => {
                    let mut config = TkdeConfig::naive(Transformation::Log, h);
                    config.kernel = a.kernel;
                    config.renormalize = renormalize;
                    tkde::estimate(&grid, sample, &config)
                }
                Some(c) => {
                    let config = CompetitorConfig {
                        estimator: c,
                        bandwidth: h,
                        kernel: a.kernel,
                    };
                    competitors::estimate_grid(&grid, sample, &config, renormalize)
                }
            }
            .context("estimating the density")?;
            (est, rule, None)
        }
    };

    // Back to the original units: f(x) = f̂(x/c)/c on the grid c·x.
    let c = p.scale;
    let xs: Vec<f64> = est.grid.iter().map(|x| x * c).collect();
    let fs: Vec<f64> = est.values.iter().map(|f| f / c).collect();
    if fs.iter().any(|f| !f.is_finite()) {
        return Err(CliError::Numerical(
            "the estimate has non-finite values".into(),
        ));
    }

    let config = json!({
        "estimator": a.estimator,
        "degree": degree,
        "kernel": a.kernel.id(),
        "smoothing": est.smoothing,
        "selection": rule,
        "lscv": scan.as_ref().map(|(s, best)| scores_json(s, *best)),
        "rescale": p.rescaled,
        "scale_factor": c,
        "renormalize": renormalize,
        "normalization": est.normalization,
        "grid_points": a.grid_points,
    });
    let text = match format {
        Format::Csv => {
            let mut s = String::from("x,density\n");
            for (x, f) in xs.iter().zip(&fs) {
                let _ = writeln!(s, "{x},{f}");
            }
            s
        }
        _ => {
            let doc = json!({
                "estimator": a.estimator,
                "smoothing": est.smoothing,
                "selection": rule,
                "scale_factor": c,
                "normalization": est.normalization,
                "n": sample.len(),
                "x": xs,
                "density": fs,
            });
            serde_json::to_string_pretty(&doc).expect("serializable") + "\n"
        }
    };
    log::info!("{} with {} ({rule})", a.estimator, est.smoothing);
    let mut manifest = RunManifest::new("estimate", config);
    manifest.input = Some(p.data);
    manifest.seed = seed;
    write_output(out, &text, manifest)
}

pub fn lscv_scan(
    a: &ScanArgs,
    format: Format,
    out: Option<&Path>,
    seed: Option<u64>,
) -> CliResult<()> {
    let p = prepare(&a.input, a.transformation == Transformation::Probex)?;
    let ys = transformed(&p.sample, a.transformation)?;
    let candidates: Vec<SmoothingSpec> = if let Some(g) = &a.h_grid {
        g.iter().map(|&h| SmoothingSpec::FixedH(h)).collect()
    } else if a.fixed_h {
        default_h_grid(&ys).context("bandwidth grid")?
    } else if let Some(g) = &a.alpha_grid {
        g.iter().map(|&v| SmoothingSpec::NnFraction(v)).collect()
    } else {
        default_alpha_grid()
    };
    let scores = bandwidth::lscv_scan(&ys, &candidates, usize::from(a.degree), a.kernel)
        .context("cross-validation")?;
    let best = argmin_score(&scores).ok_or_else(|| {
        CliError::Numerical("cross-validation: no candidate has a finite score".into())
    })?;

    let text = match format {
        Format::Csv => {
            let mut s = String::from("kind,value,score,selected\n");
            for (i, (c, score)) in scores.iter().enumerate() {
                let kind = match c {
                    SmoothingSpec::FixedH(_) => "h",
                    SmoothingSpec::NnFraction(_) => "alpha",
                };
                let _ = writeln!(s, "{kind},{},{score},{}", c.value(), i == best);
            }
            s
        }
        _ => {
            let doc = json!({
                "transformation": a.transformation.id(),
                "degree": a.degree,
                "selected": scores[best].0,
                "scores": scores_json(&scores, best),
            });
            serde_json::to_string_pretty(&doc).expect("serializable") + "\n"
        }
    };
    eprintln!("selected {}", scores[best].0);
    let config = json!({
        "transformation": a.transformation.id(),
        "degree": a.degree,
        "kernel": a.kernel.id(),
        "candidates": candidates,
        "selected": scores[best].0,
        "rescale": p.rescaled,
        "scale_factor": p.scale,
    });
    let mut manifest = RunManifest::new("lscv-scan", config);
    manifest.input = Some(p.data);
    manifest.seed = seed;
    write_output(out, &text, manifest)
}

pub fn bench(
    a: &BenchArgs,
    format: Format,
    out: Option<&Path>,
    seed: Option<u64>,
) -> CliResult<()> {
    let raw = std::fs::read_to_string(&a.config).map_err(|e| CliError::io(&a.config, e))?;
    let mut config: BenchConfig = serde_json::from_str(&raw).map_err(|e| {
        CliError::Usage(format!(
            "{}: invalid benchmark config: {e}",
            a.config.display()
        ))
    })?;
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(m) = a.replications {
        config.replications = m;
    }
    config.validate()?;
    let result = run_benchmark(&config).context("benchmark")?;
    let table = match format {
        Format::Csv => TableFormat::Csv,
        Format::Json => TableFormat::Json,
        Format::Text => TableFormat::Text,
    };
    let mut text = emit_tables(&result, table)?;
    if !text.ends_with('\n') {
        text.push('\n');
    }
    let failures: usize = result.cells.iter().map(|c| c.failures).sum();
    if failures > 0 {
        log::warn!("{failures} estimator run(s) failed; see the failures column");
    }
    let mut manifest = RunManifest::new(
        "bench",
        serde_json::to_value(&config).expect("serializable"),
    );
    manifest.seed = Some(config.seed);
    write_output(out, &text, manifest)
}

pub fn asymptotics(a: &AsymptoticsArgs, format: Format, out: Option<&Path>) -> CliResult<()> {
    let params = a.density.params()?;
    let to = match a.to {
        Some(t) => t,
        None => params.quantile(0.99)?,
    };
    if !(a.from > 0.0 && a.from < to) || a.points < 2 {
        return Err(CliError::Usage(format!(
            "need 0 < --from < --to and --points >= 2 (got {}, {to}, {})",
            a.from, a.points
        )));
    }
    let exact = a.density == DensitySpec::Preset(1);
    let mut rows = Vec::with_capacity(a.points);
    for x in linspace(a.from, to, a.points) {
        let d = if exact {
            DensityDerivatives::exponential(x)
        } else {
            DensityDerivatives::from_fn(x, |z| params.pdf(z)).context("density derivatives")?
        };
        rows.push(asymptotic_row(x, a.transformation, &d).context("asymptotic terms")?);
    }
    let text = match format {
        Format::Csv => {
            let mut s = String::from("x,bias_naive,bias_loclin,bias_locquad,variance\n");
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    r.x, r.bias_naive, r.bias_loclin, r.bias_locquad, r.variance
                );
            }
            s
        }
        _ => {
            let doc: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "x": r.x,
                        "bias_naive": r.bias_naive,
                        "bias_loclin": r.bias_loclin,
                        "bias_locquad": r.bias_locquad,
                        "variance": r.variance,
                    })
                })
                .collect();
            serde_json::to_string_pretty(&doc).expect("serializable") + "\n"
        }
    };
    let config = json!({
        "density": a.density,
        "params": params,
        "transformation": a.transformation.id(),
        "from": a.from,
        "to": to,
        "points": a.points,
        "derivatives": if exact { "exact" } else { "finite-difference" },
    });
    write_output(out, &text, RunManifest::new("asymptotics", config))
}

pub fn sample(
    a: &SampleArgs,
    format: Format,
    out: Option<&Path>,
    seed: Option<u64>,
) -> CliResult<()> {
    if a.n == 0 {
        return Err(CliError::Usage("sample size must be positive".into()));
    }
    let params = a.density.params()?;
    let seed = seed.unwrap_or(0);
    let xs = params.sample(a.n, seed);
    let text = match format {
        Format::Csv => {
            let mut s = String::from("x\n");
            for x in &xs {
                let _ = writeln!(s, "{x}");
            }
            s
        }
        _ => {
            let doc = json!({ "density": a.density, "seed": seed, "x": xs });
            serde_json::to_string_pretty(&doc).expect("serializable") + "\n"
        }
    };
    let config = json!({ "density": a.density, "params": params, "n": a.n });
    let mut manifest = RunManifest::new("sample", config);
    manifest.seed = Some(seed);
    write_output(out, &text, manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use lltkde::Kernel;

    #[test]
    fn default_renormalization() {
        assert!(renormalizes_by_default(BenchEstimator::LocalProbex));
        assert!(renormalizes_by_default(BenchEstimator::Gamma));
        assert!(!renormalizes_by_default(BenchEstimator::NaiveLog));
        assert!(!renormalizes_by_default(BenchEstimator::Reflection));
    }

    #[test]
    fn kernel_ids_round_trip() {
        for k in [Kernel::Gaussian, Kernel::Epanechnikov] {
            assert_eq!(k.id().parse::<Kernel>().unwrap(), k);
        }
    }
}
