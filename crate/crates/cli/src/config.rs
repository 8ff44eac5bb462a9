//! Experiment descriptors: a TOML file plus command-line overrides.
//!
//! ```toml
//! command = "solve"
//! seed = 7
//! output = "out/solve.csv"
//!
//! [params]
//! eps = 1e-3
//! kernel = { variant = "beta_exponential", beta = 0.75 }
//! ```

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Environment variable naming the directory for outputs when no path is given.
pub const OUTPUT_DIR_ENV: &str = "LCHS_OUTPUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    KernelPlot,
    FourierCheck,
    TruncationSweep,
    Solve,
    Gibbs,
    Hybrid,
    Estimate,
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::KernelPlot => "kernel-plot",
            Self::FourierCheck => "fourier-check",
            Self::TruncationSweep => "truncation-sweep",
            Self::Solve => "solve",
            Self::Gibbs => "gibbs",
            Self::Hybrid => "hybrid",
            Self::Estimate => "estimate",
            Self::Selftest => "selftest",
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    command: Option<Command>,
    seed: Option<u64>,
    output: Option<PathBuf>,
    #[serde(default)]
    params: toml::Table,
}

/// A fully resolved experiment: config values with overrides applied.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub command: Command,
    pub seed: Option<u64>,
    pub output_path: Option<PathBuf>,
    pub params: toml::Table,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub params: Vec<String>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

fn parse_file(text: &str, origin: &str) -> Result<ConfigFile, CliError> {
    toml::from_str(text).map_err(|e| {
        let at = e.span().map(|s| line_col(text, s.start));
        let msg = e.message().replace('\n', " ");
        match at {
            Some((line, col)) => CliError::Config(format!("{origin}: line {line} column {col}: {msg}")),
            None => CliError::Config(format!("{origin}: {msg}")),
        }
    })
}

/// Parses `value` as a TOML value, falling back to a bare string.
fn parse_value(value: &str) -> toml::Value {
    let doc = format!("v = {value}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(value.to_string()),
    }
}

/// Applies `a.b.c=value`, creating intermediate tables as needed.
fn set_param(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--param expects KEY=VALUE, got `{assignment}`")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("--param has an empty key in `{assignment}`")));
    }
    let (last, parents) = path.split_last().expect("split yields one piece");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("--param: `{p}` is not a table")))?;
    }
    cur.insert(last.to_string(), parse_value(value.trim()));
    Ok(())
}

/// Deep merge: tables recurse, everything else replaces.
fn merge(base: &mut toml::Table, over: &toml::Table) {
    for (k, v) in over {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

impl ExperimentConfig {
    /// Loads a config file; its `command`, if present, must agree with `expected`.
    pub fn load(path: Option<&Path>, expected: Option<Command>, overrides: &Overrides) -> Result<Self, CliError> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                parse_file(&text, &p.display().to_string())?
            }
            None => ConfigFile::default(),
        };
        let command = match (file.command, expected) {
            (Some(a), Some(b)) if a != b => {
                return Err(CliError::Config(format!(
                    "config is for `{}` but `{}` was invoked",
                    a.name(),
                    b.name()
                )))
            }
            (Some(c), _) | (None, Some(c)) => c,
            (None, None) => return Err(CliError::Config("config has no `command` key".into())),
        };
        let mut params = file.params;
        for p in &overrides.params {
            set_param(&mut params, p)?;
        }
        Ok(Self {
            command,
            seed: overrides.seed.or(file.seed),
            output_path: overrides.output.clone().or(file.output),
            params,
        })
    }

    /// Typed view of `params` laid over `P::default()`; unknown keys are errors.
    pub fn params<P: DeserializeOwned + Serialize + Default>(&self) -> Result<P, CliError> {
        let mut base = toml::Table::try_from(P::default()).expect("defaults serialize to a table");
        merge(&mut base, &self.params);
        toml::Value::Table(base)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("params: {}", e.message().replace('\n', " "))))
    }

    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Config(format!("`{}` is randomized and needs a seed", self.command.name())))
    }

    /// Explicit path, else `$LCHS_OUTPUT_DIR/<command>.csv`, else `None` for stdout.
    pub fn resolved_output(&self) -> Option<PathBuf> {
        self.output_path.clone().or_else(|| {
            std::env::var_os(OUTPUT_DIR_ENV)
                .filter(|d| !d.is_empty())
                .map(|d| PathBuf::from(d).join(format!("{}.csv", self.command.name())))
        })
    }
}
