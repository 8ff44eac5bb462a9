//! `lchs`: batch experiment driver.
//!
//! Every command reads an optional TOML config, applies `--seed`, `--output`
//! and `--param key=value` overrides, and writes one CSV whose `#` header
//! records the tool version and every resolved parameter.

mod commands;
mod config;
mod error;
mod selftest;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{Command, ExperimentConfig, Overrides};
use crate::error::CliError;

const PARAMS_HELP: &str = "\
Parameters (set under [params] in the config or with --param KEY=VALUE; values are TOML):

  kernel-plot       kernels=[{variant=...}], k_min=-50, k_max=50, points=1001
  fourier-check     kernels, xs=[-1,0,0.5,1,2,5], tol=1e-8, check_tol=1e-6
  truncation-sweep  mode=\"smallest\"|\"curve\", dim=8, betas=[0.3,0.4,0.6,0.75,0.9],
                    include_cauchy=true, targets=[0.01,0.001], step=0.5, k_max=40, tol
                    (needs a seed)
  solve             generator=\"time_dependent_inhomogeneous\" | \"time_dependent_homogeneous\"
                    | \"constant_homogeneous\" (needs a seed), dim=4, horizon=1,
                    or a_file + u0_file [+ b_file]; kernel, eps=1e-3;
                    explicit grid: trunc_k, step_h1, order_q [, step_h2, order_q2], ham_tol
  gibbs             dim=16 (seeded) or l_file, gamma=1, eps=1e-3, kernel
  hybrid            problem=\"scalar\"|\"constant_homogeneous\", scalar_a=1, dim=2, horizon=1,
                    observable_file, kernel, eps=1e-2, samples=[100,1000,10000], repeats=1,
                    full_enumeration=false, noise_sd (needs a seed)
  estimate          kind=\"homogeneous\"|\"inhomogeneous\"|\"time_independent\"|\"gibbs\"|\"comparison\",
                    eps_values=[], cost={alpha_a, horizon, eps, beta, ...}
  selftest          none

Kernels are written {variant=\"beta_exponential\", beta=0.75}, {variant=\"cauchy\"},
{variant=\"poly_power\", p=2} or {variant=\"log_power\", p=2}.

Output goes to --output, else the config's `output`, else $LCHS_OUTPUT_DIR/<command>.csv,
else stdout. Exit codes: 0 ok, 2 config error, 3 numeric failure, 4 invariant violation.";

#[derive(Parser, Debug)]
#[command(name = "lchs", version, about = "LCHS experiment driver", after_help = PARAMS_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: OverrideArgs,
}

#[derive(Args, Debug, Clone, Default)]
struct OverrideArgs {
    /// Seed for randomized commands.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Parameter override, repeatable; dotted keys reach nested tables.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run the command named in a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Tabulate g(k) = f(k)/(1-ik) for several kernels.
    KernelPlot(Common),
    /// Check that the Fourier transform of g is e^{-x} for x >= 0.
    FourierCheck(Common),
    /// Truncation error of the matrix identity against K, per kernel.
    TruncationSweep(Common),
    /// Solve du/dt = -A(t)u + b(t) and compare with the reference solver.
    Solve(Common),
    /// Prepare the purified Gibbs state e^{-gamma L}/Z.
    Gibbs(Common),
    /// Importance-sampled observable estimates.
    Hybrid(Common),
    /// Analytic resource estimates.
    Estimate(Common),
    /// Run the invariant suite.
    Selftest(Common),
}

fn resolve(cmd: Cmd) -> Result<ExperimentConfig, CliError> {
    let to_overrides = |o: OverrideArgs| Overrides {
        seed: o.seed,
        output: o.output,
        params: o.params,
    };
    let (path, expected, overrides) = match cmd {
        Cmd::Run { config, overrides } => (Some(config), None, overrides),
        Cmd::KernelPlot(c) => (c.config, Some(Command::KernelPlot), c.overrides),
        Cmd::FourierCheck(c) => (c.config, Some(Command::FourierCheck), c.overrides),
        Cmd::TruncationSweep(c) => (c.config, Some(Command::TruncationSweep), c.overrides),
        Cmd::Solve(c) => (c.config, Some(Command::Solve), c.overrides),
        Cmd::Gibbs(c) => (c.config, Some(Command::Gibbs), c.overrides),
        Cmd::Hybrid(c) => (c.config, Some(Command::Hybrid), c.overrides),
        Cmd::Estimate(c) => (c.config, Some(Command::Estimate), c.overrides),
        Cmd::Selftest(c) => (c.config, Some(Command::Selftest), c.overrides),
    };
    ExperimentConfig::load(path.as_deref(), expected, &to_overrides(overrides))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn execute(cmd: Cmd) -> Result<(), CliError> {
    let cfg = resolve(cmd)?;
    let artifact = commands::run(&cfg)?;
    match cfg.resolved_output() {
        Some(path) => {
            write_file(&path, &artifact.csv)?;
            for (suffix, text) in &artifact.sidecars {
                write_file(&path.with_extension(suffix), text)?;
            }
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(artifact.csv.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Io(format!("cannot write stdout: {e}")))?;
        }
    }
    if let Some(s) = &artifact.summary {
        eprintln!("{s}");
    }
    match artifact.violation {
        Some(v) => Err(CliError::Invariant(v)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("{}", CliError::Config(first.to_string()).line());
            return ExitCode::from(2);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.exit_code())
        }
    }
}
