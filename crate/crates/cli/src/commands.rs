//! One function per command. Each returns the artifact text; nothing here writes files.

// `!(x > 0)` guards reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use lchs::gibbs::{gibbs_grid, prepare_purified_gibbs};
use lchs::io::{csv_header, matrix_from_json, matrix_to_json, vector_from_json, vector_to_json};
use lchs::kernels::{fourier_check, g_eval, KernelSpec};
use lchs::linalg::{ComplexMatrix, OdeProblem, TimeDependentMatrix, TimeDependentVector};
use lchs::problems::{
    constant_homogeneous, normalized_pair, rng, time_dependent_homogeneous, time_dependent_inhomogeneous, unit_psd,
};
use lchs::quadrature::{build_grid, select_quadrature_params, select_truncation_K, QuadratureGrid};
use lchs::resources::{
    comparison_csv, comparison_table, gibbs_cost, homogeneous_cost, inhomogeneous_cost, time_independent_cost,
    CostInput, ResourceEstimate,
};
use lchs::sampler::{build_plan, estimate_observable, EstimatorOptions, EvolutionCache};
use lchs::solver::{
    default_ham_tol, estimate_lambda_xi, explicit_time_grid, plan_solve, smallest_sufficient_k, solve_planned,
    truncation_error_sweep, SolvePlan,
};
use serde::{Deserialize, Serialize};

use crate::config::{Command, ExperimentConfig};
use crate::error::CliError;

/// Largest `M²` the pair sampler is allowed to tabulate.
const MAX_PAIRS: usize = 50_000_000;

/// What a command produced.
#[derive(Debug, Default)]
pub struct Artifact {
    pub csv: String,
    /// `(suffix, contents)` files written next to the main output.
    pub sidecars: Vec<(&'static str, String)>,
    /// Human-readable summary for stderr.
    pub summary: Option<String>,
    /// Set when the run completed but a checked invariant failed.
    pub violation: Option<String>,
}

fn beta(b: f64) -> KernelSpec {
    KernelSpec::BetaExponential { beta: b }
}

pub fn header(cfg: &ExperimentConfig, params: &impl Serialize, extra: &[(&str, String)]) -> String {
    let mut pairs = vec![
        ("tool", format!("lchs {}", env!("CARGO_PKG_VERSION"))),
        ("command", cfg.command.name().to_string()),
        ("seed", cfg.seed.map_or_else(|| "none".into(), |s| s.to_string())),
        ("params", serde_json::to_string(params).expect("params serialize")),
    ];
    pairs.extend(extra.iter().map(|(k, v)| (*k, v.clone())));
    csv_header(&pairs)
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

pub fn run(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    match cfg.command {
        Command::KernelPlot => kernel_plot(cfg),
        Command::FourierCheck => fourier(cfg),
        Command::TruncationSweep => truncation_sweep(cfg),
        Command::Solve => solve(cfg),
        Command::Gibbs => gibbs(cfg),
        Command::Hybrid => hybrid(cfg),
        Command::Estimate => estimate(cfg),
        Command::Selftest => crate::selftest::run(cfg),
    }
}

// kernel-plot

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelPlotParams {
    pub kernels: Vec<KernelSpec>,
    pub k_min: f64,
    pub k_max: f64,
    pub points: usize,
}

impl Default for KernelPlotParams {
    fn default() -> Self {
        Self {
            kernels: vec![beta(0.1), beta(0.5), beta(0.9), beta(0.99), KernelSpec::Cauchy],
            k_min: -50.0,
            k_max: 50.0,
            points: 1001,
        }
    }
}

fn kernel_plot(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let p: KernelPlotParams = cfg.params()?;
    if p.points < 2 || !(p.k_max > p.k_min) {
        return Err(CliError::Config(
            "kernel-plot needs points >= 2 and k_max > k_min".into(),
        ));
    }
    let mut csv = header(cfg, &p, &[]);
    csv += "kernel,k,re_g,im_g,abs_g\n";
    for spec in &p.kernels {
        spec.validate()?;
        for i in 0..p.points {
            let k = p.k_min + (p.k_max - p.k_min) * i as f64 / (p.points - 1) as f64;
            let g = g_eval(spec, k)?;
            let _ = writeln!(csv, "{},{k},{},{},{}", spec.label(), g.re, g.im, g.norm());
        }
    }
    Ok(Artifact {
        csv,
        ..Default::default()
    })
}

// fourier-check

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FourierParams {
    pub kernels: Vec<KernelSpec>,
    pub xs: Vec<f64>,
    /// Quadrature tolerance of each transform.
    pub tol: f64,
    /// Allowed deviation from the closed form.
    pub check_tol: f64,
}

impl Default for FourierParams {
    fn default() -> Self {
        Self {
            kernels: vec![
                beta(0.5),
                beta(0.75),
                KernelSpec::Cauchy,
                KernelSpec::PolyPower { p: 2 },
                KernelSpec::LogPower { p: 2 },
            ],
            xs: vec![-1.0, 0.0, 0.5, 1.0, 2.0, 5.0],
            tol: 1e-8,
            check_tol: 1e-6,
        }
    }
}

fn fourier(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let p: FourierParams = cfg.params()?;
    let mut csv = header(cfg, &p, &[]);
    csv += "kernel,x,re,im,expected,abs_error,status\n";
    let mut failures = Vec::new();
    for spec in &p.kernels {
        for &x in &p.xs {
            let v = fourier_check(spec, x, p.tol)?;
            // the closed form holds for x >= 0, and for every x when the kernel is even
            let expected = if x >= 0.0 {
                Some((-x).exp())
            } else if *spec == KernelSpec::Cauchy {
                Some(x.exp())
            } else {
                None
            };
            let (exp_s, err_s, status) = match expected {
                Some(e) => {
                    let err = (v - lchs::scalar::real(e)).norm();
                    let ok = err <= p.check_tol;
                    if !ok {
                        failures.push(format!("{} at x={x}", spec.label()));
                    }
                    (e.to_string(), format!("{err:e}"), if ok { "pass" } else { "fail" })
                }
                None => ("none".into(), "none".into(), "unchecked"),
            };
            let _ = writeln!(csv, "{},{x},{},{},{exp_s},{err_s},{status}", spec.label(), v.re, v.im);
        }
    }
    let violation = (!failures.is_empty()).then(|| format!("fourier identity violated: {}", failures.join(", ")));
    Ok(Artifact {
        csv,
        violation,
        ..Default::default()
    })
}

// truncation-sweep

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Smallest `K` reaching each target.
    Smallest,
    /// Error at every `K` on a uniform grid.
    Curve,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepParams {
    pub mode: SweepMode,
    pub dim: usize,
    pub betas: Vec<f64>,
    pub include_cauchy: bool,
    pub targets: Vec<f64>,
    pub step: f64,
    pub k_max: f64,
    /// Matrix quadrature tolerance; defaults to target/100 or 1e-8 for curves.
    pub tol: Option<f64>,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            mode: SweepMode::Smallest,
            dim: 8,
            betas: vec![0.3, 0.4, 0.6, 0.75, 0.9],
            include_cauchy: true,
            targets: vec![0.01, 0.001],
            step: 0.5,
            k_max: 40.0,
            tol: None,
        }
    }
}

fn truncation_sweep(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let p: SweepParams = cfg.params()?;
    let seed = cfg.require_seed()?;
    if p.dim == 0 || !(p.step > 0.0) {
        return Err(CliError::Config("truncation-sweep needs dim >= 1 and step > 0".into()));
    }
    let pair = normalized_pair::<f64>(p.dim, seed);
    let mut specs: Vec<KernelSpec> = p.betas.iter().map(|&b| beta(b)).collect();
    if p.include_cauchy {
        specs.push(KernelSpec::Cauchy);
    }
    for s in &specs {
        s.validate()?;
    }
    let mut csv = header(cfg, &p, &[]);
    match p.mode {
        SweepMode::Smallest => {
            csv += "kernel,target,smallest_k\n";
            for &target in &p.targets {
                for spec in &specs {
                    let k =
                        smallest_sufficient_k(&pair.l, &pair.h, spec, target, p.step, p.tol.unwrap_or(target / 100.0))?;
                    let _ = writeln!(csv, "{},{target},{k}", spec.label());
                }
            }
        }
        SweepMode::Curve => {
            let count = (p.k_max / p.step).floor() as usize;
            let ks: Vec<f64> = (1..=count).map(|i| p.step * i as f64).collect();
            csv += "kernel,K,error\n";
            for row in truncation_error_sweep(&pair.l, &pair.h, &specs, &ks, p.tol.unwrap_or(1e-8))? {
                let _ = writeln!(csv, "{},{},{}", row.spec.label(), row.trunc_k, row.error);
            }
        }
    }
    Ok(Artifact {
        csv,
        ..Default::default()
    })
}

// solve

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveParams {
    /// `time_dependent_inhomogeneous`, `time_dependent_homogeneous` or `constant_homogeneous`.
    pub generator: Option<String>,
    pub dim: usize,
    pub horizon: f64,
    /// Constant `A` in the matrix file format; needs `u0_file`.
    pub a_file: Option<PathBuf>,
    pub u0_file: Option<PathBuf>,
    /// Constant source term `b`.
    pub b_file: Option<PathBuf>,
    pub kernel: KernelSpec,
    pub eps: f64,
    pub trunc_k: Option<f64>,
    pub step_h1: Option<f64>,
    pub order_q: Option<usize>,
    pub step_h2: Option<f64>,
    pub order_q2: Option<usize>,
    pub ham_tol: Option<f64>,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            generator: None,
            dim: 4,
            horizon: 1.0,
            a_file: None,
            u0_file: None,
            b_file: None,
            kernel: beta(0.75),
            eps: 1e-3,
            trunc_k: None,
            step_h1: None,
            order_q: None,
            step_h2: None,
            order_q2: None,
            ham_tol: None,
        }
    }
}

const DEFAULT_GENERATOR: &str = "time_dependent_inhomogeneous";

fn generated_problem(name: &str, dim: usize, seed: u64, horizon: f64) -> Result<OdeProblem<f64>, CliError> {
    Ok(match name {
        "time_dependent_inhomogeneous" => time_dependent_inhomogeneous(dim, seed, horizon)?,
        "time_dependent_homogeneous" => time_dependent_homogeneous(dim, seed, horizon)?,
        "constant_homogeneous" => constant_homogeneous(dim, seed, horizon)?,
        other => return Err(CliError::Config(format!("unknown generator `{other}`"))),
    })
}

fn solve_problem(cfg: &ExperimentConfig, p: &SolveParams) -> Result<OdeProblem<f64>, CliError> {
    match (&p.a_file, &p.generator) {
        (Some(_), Some(_)) => Err(CliError::Config("give either a_file or generator, not both".into())),
        (Some(a), None) => {
            let a = matrix_from_json::<f64>(&read_text(a)?)?;
            let u0_path = p
                .u0_file
                .as_ref()
                .ok_or_else(|| CliError::Config("a_file needs u0_file".into()))?;
            let u0 = vector_from_json::<f64>(&read_text(u0_path)?)?;
            let b = match &p.b_file {
                Some(path) => Some(TimeDependentVector::constant(vector_from_json::<f64>(&read_text(
                    path,
                )?)?)),
                None => None,
            };
            Ok(OdeProblem::new(TimeDependentMatrix::constant(a), b, u0, p.horizon)?)
        }
        (None, generator) => {
            if p.u0_file.is_some() || p.b_file.is_some() {
                return Err(CliError::Config("u0_file and b_file need a_file".into()));
            }
            let seed = cfg.require_seed()?;
            generated_problem(
                generator.as_deref().unwrap_or(DEFAULT_GENERATOR),
                p.dim,
                seed,
                p.horizon,
            )
        }
    }
}

fn explicit_plan(problem: &OdeProblem<f64>, p: &SolveParams) -> Result<Option<SolvePlan<f64>>, CliError> {
    let (k, h1, q) = match (p.trunc_k, p.step_h1, p.order_q) {
        (None, None, None) => {
            if p.step_h2.is_some() || p.order_q2.is_some() {
                return Err(CliError::Config(
                    "step_h2/order_q2 need trunc_k, step_h1 and order_q".into(),
                ));
            }
            return Ok(None);
        }
        (Some(k), Some(h1), Some(q)) => (k, h1, q),
        _ => {
            return Err(CliError::Config(
                "explicit grids need all of trunc_k, step_h1 and order_q".into(),
            ))
        }
    };
    let grid = build_grid(&p.kernel, k, h1, q)?;
    let (lambda_cap, xi_cap) = estimate_lambda_xi(problem, 4)?;
    let time_grid = match (&problem.b, p.step_h2, p.order_q2) {
        (None, None, None) => None,
        (None, _, _) => {
            return Err(CliError::Config(
                "step_h2/order_q2 only apply with a source term".into(),
            ))
        }
        (Some(_), Some(h2), Some(q2)) => Some(explicit_time_grid(problem, h2, q2)?),
        (Some(_), _, _) => return Err(CliError::Config("a source term needs step_h2 and order_q2".into())),
    };
    Ok(Some(SolvePlan {
        ham_tol: p.ham_tol.unwrap_or_else(|| default_ham_tol(p.eps, &grid)),
        grid,
        time_grid,
        lambda_cap,
        xi_cap,
    }))
}

fn solve(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let p: SolveParams = cfg.params()?;
    p.kernel.validate()?;
    if !(p.eps > 0.0) {
        return Err(CliError::Config("eps must be > 0".into()));
    }
    let problem = solve_problem(cfg, &p)?;
    let plan = match explicit_plan(&problem, &p)? {
        Some(plan) => plan,
        None => {
            let mut plan = plan_solve(&problem, &p.kernel, p.eps)?;
            if let Some(t) = p.ham_tol {
                plan.ham_tol = t;
            }
            plan
        }
    };
    let r = solve_planned(&problem, &plan)?;
    let tg = plan.time_grid.as_ref();
    let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
    let extra = [
        ("K", r.parameters.trunc_k.to_string()),
        ("h1", r.parameters.step_h1.to_string()),
        ("Q", r.parameters.order_q.to_string()),
        ("M", r.grid_sizes.0.to_string()),
        ("h2", opt(tg.map(|t| t.step_h2.to_string()))),
        ("Q2", opt(tg.map(|t| t.order_q2.to_string()))),
        ("M'", r.grid_sizes.1.to_string()),
        ("ham_tol", r.parameters.ham_tol.to_string()),
        ("lambda", plan.lambda_cap.to_string()),
        ("xi", plan.xi_cap.to_string()),
        ("abs_error", r.abs_error.to_string()),
        ("state_error", r.state_error.to_string()),
    ];
    let mut csv = header(cfg, &p, &extra);
    csv += "index,approx_re,approx_im,oracle_re,oracle_im\n";
    for (i, (a, o)) in r.approx_u.iter().zip(&r.oracle_u).enumerate() {
        let _ = writeln!(csv, "{i},{},{},{},{}", a.re, a.im, o.re, o.im);
    }
    let summary = extra
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ");
    Ok(Artifact {
        csv,
        summary: Some(summary),
        ..Default::default()
    })
}

// gibbs

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GibbsParams {
    pub dim: usize,
    /// Hermitian PSD `L` in the matrix file format; otherwise a seeded random one.
    pub l_file: Option<PathBuf>,
    pub gamma: f64,
    pub eps: f64,
    pub kernel: KernelSpec,
}

impl Default for GibbsParams {
    fn default() -> Self {
        Self {
            dim: 16,
            l_file: None,
            gamma: 1.0,
            eps: 1e-3,
            kernel: beta(0.75),
        }
    }
}

fn gibbs(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let p: GibbsParams = cfg.params()?;
    let l = match &p.l_file {
        Some(path) => matrix_from_json::<f64>(&read_text(path)?)?,
        None => unit_psd::<f64>(p.dim, &mut rng(cfg.require_seed()?)),
    };
    let grid = gibbs_grid(&l, p.gamma, &p.kernel, p.eps)?;
    let r = prepare_purified_gibbs(&l, p.gamma, &grid, 0.0)?;
    let extra = [
        ("K", grid.trunc_k.to_string()),
        ("h1", grid.step_h1.to_string()),
        ("Q", grid.order_q.to_string()),
    ];
    let mut csv = header(cfg, &p, &extra);
    csv += "dim,gamma,M,partition_z,trace_distance,purified_error,norm,expected_norm,postselection_ratio\n";
    let _ = writeln!(
        csv,
        "{},{},{},{},{},{},{},{},{}",
        l.dim(),
        p.gamma,
        grid.total_m(),
        r.partition_z,
        r.trace_distance_to_exact,
        r.purified_error,
        r.unnormalized_norm,
        r.expected_norm(),
        r.postselection_ratio
    );
    Ok(Artifact {
        csv,
        sidecars: vec![
            ("density.json", matrix_to_json(&r.density)),
            ("purified.json", vector_to_json(&r.purified_state)),
        ],
        summary: Some(format!(
            "Z={} trace_distance={} postselection_ratio={}",
            r.partition_z, r.trace_distance_to_exact, r.postselection_ratio
        )),
        violation: None,
    })
}

// hybrid

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HybridParams {
    /// `scalar` (du/dt = -a u, u0 = 1) or `constant_homogeneous`.
    pub problem: String,
    pub scalar_a: f64,
    pub dim: usize,
    pub horizon: f64,
    /// Observable in the matrix file format; identity when absent.
    pub observable_file: Option<PathBuf>,
    pub kernel: KernelSpec,
    pub eps: f64,
    pub samples: Vec<usize>,
    pub repeats: u64,
    pub full_enumeration: bool,
    pub noise_sd: Option<f64>,
}

impl Default for HybridParams {
    fn default() -> Self {
        Self {
            problem: "scalar".into(),
            scalar_a: 1.0,
            dim: 2,
            horizon: 1.0,
            observable_file: None,
            kernel: beta(0.75),
            eps: 1e-2,
            samples: vec![100, 1000, 10000],
            repeats: 1,
            full_enumeration: false,
            noise_sd: None,
        }
    }
}

/// Grid from the scalar parameter selectors at `ε/2` each.
fn selector_grid(spec: &KernelSpec, eps: f64, horizon: f64, max_l: f64) -> Result<QuadratureGrid<f64>, CliError> {
    let b = spec
        .beta()
        .ok_or_else(|| CliError::Config("parameter selection needs the beta_exponential kernel".into()))?;
    let k = select_truncation_K(b, eps / 2.0)?;
    let (h1, q) = select_quadrature_params(horizon, max_l.max(f64::MIN_POSITIVE), k, b, eps / 2.0)?;
    Ok(build_grid(spec, k, h1, q)?)
}

fn hybrid(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let p: HybridParams = cfg.params()?;
    let seed = cfg.require_seed()?;
    let problem = match p.problem.as_str() {
        "scalar" => OdeProblem::homogeneous(
            TimeDependentMatrix::constant(ComplexMatrix::from_real_rows(&[&[p.scalar_a]])?),
            vec![lchs::scalar::real(1.0)],
            p.horizon,
        )?,
        "constant_homogeneous" => constant_homogeneous(p.dim, seed, p.horizon)?,
        other => return Err(CliError::Config(format!("unknown hybrid problem `{other}`"))),
    };
    let obs = match &p.observable_file {
        Some(path) => matrix_from_json::<f64>(&read_text(path)?)?,
        None => ComplexMatrix::identity(problem.dim()),
    };
    let grid = selector_grid(&p.kernel, p.eps, p.horizon, problem.max_norm_l())?;
    let m = grid.total_m();
    if m.saturating_mul(m) > MAX_PAIRS {
        return Err(CliError::Config(format!(
            "grid too large for pair sampling: M={m}; raise eps"
        )));
    }
    let cache = EvolutionCache::new(&problem, &grid, default_ham_tol(p.eps, &grid))?;
    let plan = build_plan(&grid)?;
    let exact = estimate_observable(
        &plan,
        &cache,
        &obs,
        0,
        0,
        EstimatorOptions {
            full_enumeration: true,
            noise_sd: None,
        },
    )?;
    let extra = [
        ("M", m.to_string()),
        ("K", grid.trunc_k.to_string()),
        ("h1", grid.step_h1.to_string()),
        ("Q", grid.order_q.to_string()),
        ("enumerated_re", exact.value_re.to_string()),
        ("enumerated_im", exact.value_im.to_string()),
    ];
    let mut csv = header(cfg, &p, &extra);
    csv += "estimate_re,estimate_im,stderr,n,seed\n";
    let options = EstimatorOptions {
        full_enumeration: p.full_enumeration,
        noise_sd: p.noise_sd,
    };
    if p.full_enumeration {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            exact.value_re, exact.value_im, 0.0, plan.pair_count, seed
        );
    } else {
        for r in 0..p.repeats.max(1) {
            for &n in &p.samples {
                let e = estimate_observable(&plan, &cache, &obs, n, seed + r, options)?;
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    e.value_re, e.value_im, e.stderr, e.n_samples, e.seed
                );
            }
        }
    }
    Ok(Artifact {
        csv,
        ..Default::default()
    })
}

// estimate

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    Homogeneous,
    Inhomogeneous,
    TimeIndependent,
    Gibbs,
    Comparison,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateParams {
    pub kind: CostKind,
    /// When non-empty, one table row per ε (overriding `cost.eps`).
    pub eps_values: Vec<f64>,
    pub cost: CostInput,
}

impl Default for EstimateParams {
    fn default() -> Self {
        Self {
            kind: CostKind::Homogeneous,
            eps_values: Vec::new(),
            cost: CostInput::unit(1e-3, 0.75),
        }
    }
}

fn cost_of(kind: CostKind, input: &CostInput) -> Result<ResourceEstimate, CliError> {
    Ok(match kind {
        CostKind::Homogeneous => homogeneous_cost(input)?,
        CostKind::Inhomogeneous => inhomogeneous_cost(input)?,
        CostKind::TimeIndependent => time_independent_cost(input)?,
        CostKind::Gibbs => gibbs_cost(input)?,
        CostKind::Comparison => unreachable!("handled by the caller"),
    })
}

fn estimate(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let p: EstimateParams = cfg.params()?;
    let mut csv = header(cfg, &p, &[]);
    if let CostKind::Comparison = p.kind {
        csv += &comparison_csv(&comparison_table(&p.cost)?);
        return Ok(Artifact {
            csv,
            ..Default::default()
        });
    }
    if p.eps_values.is_empty() {
        let est = cost_of(p.kind, &p.cost)?;
        csv += "key,value\n";
        for line in est.summary().lines() {
            let (k, v) = line.split_once('=').expect("summary lines are key=value");
            let _ = writeln!(csv, "{k},\"{v}\"");
        }
        return Ok(Artifact {
            csv,
            summary: Some(est.summary().trim_end().replace('\n', " ")),
            ..Default::default()
        });
    }
    csv += "eps,K,h1,Q,M,h2,Q2,M_prime,matrix_queries,state_prep_queries\n";
    for &eps in &p.eps_values {
        let input = CostInput { eps, ..p.cost.clone() };
        let e = cost_of(p.kind, &input)?;
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        let _ = writeln!(
            csv,
            "{eps},{},{},{},{},{},{},{},{},{}",
            e.trunc_k,
            e.step_h1,
            e.order_q,
            e.grid_m,
            opt(e.step_h2.map(|v| v.to_string())),
            opt(e.order_q2.map(|v| v.to_string())),
            e.grid_mprime,
            e.matrix_queries,
            e.state_prep_queries
        );
    }
    Ok(Artifact {
        csv,
        ..Default::default()
    })
}
