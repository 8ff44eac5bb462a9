//! Fast invariant suite. Each check reports a measured value against a threshold.

use std::fmt::Write as _;

use lchs::gibbs::{gibbs_grid, prepare_purified_gibbs};
use lchs::kernels::{fourier_check, normalization_residual, KernelSpec};
use lchs::linalg::{time_ordered_propagator, ComplexMatrix, OdeProblem, TimeDependentMatrix};
use lchs::problems::{normalized_pair, rng, time_dependent_homogeneous, time_dependent_inhomogeneous, unit_psd};
use lchs::quadrature::{build_grid, select_quadrature_params, select_truncation_K, truncation_bound};
use lchs::resources::{fitted_log_exponent, homogeneous_cost, standard_eps_sweep, CostInput};
use lchs::sampler::{build_plan, estimate_observable, sample_count, EstimatorOptions, EvolutionCache};
use lchs::scalar::real;
use lchs::solver::{approx_propagator, plan_solve, solve_planned, truncation_errors};
use serde::{Deserialize, Serialize};

use crate::commands::Artifact;
use crate::config::ExperimentConfig;
use crate::error::CliError;

const BETA: KernelSpec = KernelSpec::BetaExponential { beta: 0.75 };

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelftestParams {}

/// `(name, value, threshold)`; passes when `value <= threshold`.
type Check = (&'static str, f64, f64);

fn checks() -> Result<Vec<Check>, CliError> {
    let mut out: Vec<Check> = Vec::new();

    let norm = [BETA, KernelSpec::Cauchy]
        .iter()
        .map(|s| normalization_residual(s, 1e-8))
        .collect::<Result<Vec<f64>, _>>()?;
    out.push((
        "kernel normalization residual",
        norm.into_iter().fold(0.0, f64::max),
        1e-6,
    ));

    let mut fourier = 0.0f64;
    for x in [0.0f64, 0.5, 1.0, 2.0, 5.0] {
        fourier = fourier.max((fourier_check(&BETA, x, 1e-8)? - real((-x).exp())).norm());
    }
    out.push(("fourier identity error", fourier, 1e-6));

    let k = select_truncation_K(0.75, 5e-7)?;
    let (h1, q) = select_quadrature_params(1.0, 5.0, k, 0.75, 5e-7)?;
    let grid = build_grid::<f64>(&BETA, k, h1, q)?;
    let scalar = [0.0, 0.5, 1.0, 2.0, 5.0]
        .iter()
        .map(|&x: &f64| (grid.scalar_reconstruction(x) - real((-x).exp())).norm())
        .fold(0.0, f64::max);
    out.push(("scalar identity error", scalar, 1e-6));

    // measured / bound, so the threshold is 1
    let pair = normalized_pair::<f64>(8, 1);
    let ks = [2.0, 5.0, 10.0];
    let mut ratio = 0.0f64;
    for b in [0.5, 0.75] {
        let errs = truncation_errors(&pair.l, &pair.h, &KernelSpec::BetaExponential { beta: b }, &ks, 1e-12)?;
        for (&kk, e) in ks.iter().zip(errs) {
            ratio = ratio.max((e - 1e-12) / truncation_bound(b, kk)?);
        }
    }
    out.push(("truncation error / bound", ratio, 1.0));

    let mut norm_excess = f64::NEG_INFINITY;
    for seed in 0..3 {
        let p = time_dependent_homogeneous::<f64>(4, seed, 1.0)?;
        let plan = plan_solve(&p, &BETA, 1e-2)?;
        let u = approx_propagator(&p, &plan.grid, plan.ham_tol)?;
        let o = time_ordered_propagator(&p.a, 0.0, 1.0, 1e-8)?;
        norm_excess = norm_excess
            .max(u.spectral_norm() - 1.0 - 1e-2)
            .max(o.spectral_norm() - 1.0 - 1e-10);
    }
    out.push(("contractivity excess", norm_excess, 0.0));

    let p = time_dependent_inhomogeneous::<f64>(2, 3, 1.0)?;
    let r = solve_planned(&p, &plan_solve(&p, &BETA, 1e-2)?)?;
    out.push(("inhomogeneous solve error", r.abs_error, 1e-2));

    let l = unit_psd::<f64>(4, &mut rng(5));
    let g = prepare_purified_gibbs(&l, 1.0, &gibbs_grid(&l, 1.0, &BETA, 1e-3)?, 0.0)?;
    out.push(("gibbs trace distance", g.trace_distance_to_exact, 1e-3));

    let p = OdeProblem::homogeneous(
        TimeDependentMatrix::constant(ComplexMatrix::from_real_rows(&[&[1.0]])?),
        vec![real(1.0)],
        1.0,
    )?;
    let k = select_truncation_K(0.75, 5e-3)?;
    let (h1, q) = select_quadrature_params(1.0, 1.0, k, 0.75, 5e-3)?;
    let grid = build_grid::<f64>(&BETA, k, h1, q)?;
    let cache = EvolutionCache::new(&p, &grid, 1e-12)?;
    let obs = ComplexMatrix::identity(1);
    let full = estimate_observable(
        &build_plan(&grid)?,
        &cache,
        &obs,
        0,
        0,
        EstimatorOptions {
            full_enumeration: true,
            noise_sd: None,
        },
    )?;
    let mut v = real(0.0);
    for (j, c) in grid.coeffs.iter().enumerate() {
        v += c * cache.state(j)?[0];
    }
    out.push((
        "enumeration vs direct",
        (full.value() - real(v.norm_sqr())).norm(),
        1e-10,
    ));

    let fitted = fitted_log_exponent(&standard_eps_sweep(), |e| {
        Ok(homogeneous_cost(&CostInput::unit(e, 0.75))?.matrix_queries)
    })?;
    out.push((
        "cost exponent relative error",
        (fitted / (1.0 + 1.0 / 0.75) - 1.0).abs(),
        0.2,
    ));

    out.push((
        "sample count deviation",
        (sample_count(0.1, 0.05, 1.0)? as f64 - 369.0).abs(),
        0.0,
    ));
    Ok(out)
}

pub fn run(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let p: SelftestParams = cfg.params()?;
    let results = checks()?;
    let mut csv = crate::commands::header(cfg, &p, &[]);
    csv += "check,value,threshold,status\n";
    let mut failed = Vec::new();
    for (name, value, threshold) in &results {
        let ok = value <= threshold;
        if !ok {
            failed.push(*name);
        }
        let _ = writeln!(
            csv,
            "{name},{value:e},{threshold:e},{}",
            if ok { "pass" } else { "fail" }
        );
    }
    Ok(Artifact {
        csv,
        summary: Some(format!(
            "{} of {} checks passed",
            results.len() - failed.len(),
            results.len()
        )),
        violation: (!failed.is_empty()).then(|| format!("selftest failed: {}", failed.join(", "))),
        ..Default::default()
    })
}
