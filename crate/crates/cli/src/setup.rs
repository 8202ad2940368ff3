//! Turns a [`Config`] into models, payoffs, measures and build specs.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use kolmonet::constructor::{ApproximationSpec, Mode};
use kolmonet::oracles::{oracle_for, Oracle, OracleSettings};
use kolmonet::rng::oracle_seed;
use kolmonet::{BlackScholesModel, Correlation, Matrix, MeasureSpec, Payoff, PayoffFamily};
use thiserror::Error;

use crate::config::{Config, ConfigError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] kolmonet::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {detail}")]
    Io { path: PathBuf, detail: String },
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.to_path_buf(), detail: e.to_string() }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Dimension from `d`, else from an explicit weight list.
pub fn dimension(config: &Config) -> CliResult<usize> {
    if let Some(d) = config.get::<usize>("d")? {
        if d == 0 {
            return Err(config.invalid("d", "dimension must be positive").into());
        }
        return Ok(d);
    }
    match weight_list(config)? {
        Some(w) => Ok(w.len()),
        None => Err(ConfigError::Missing("d".into()).into()),
    }
}

fn weight_list(config: &Config) -> CliResult<Option<Vec<f64>>> {
    match config.raw("weights") {
        None | Some("equal") => Ok(None),
        Some(_) => Ok(config.list::<f64>("weights")?),
    }
}

/// Scalar broadcast to `d` entries, or a list of exactly `d` entries.
fn per_coordinate(config: &Config, key: &str, d: usize, default: f64) -> CliResult<Vec<f64>> {
    let values = config.list::<f64>(key)?.unwrap_or_else(|| vec![default]);
    match values.len() {
        1 => Ok(vec![values[0]; d]),
        n if n == d => Ok(values),
        n => Err(config.invalid(key, format!("expected 1 or {d} values, found {n}")).into()),
    }
}

fn read_numbers(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map_err(|_| CliError::io(path, format!("line {}: `{t}` is not a number", i + 1))))
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// `identity`, `constant:RHO`, or a path to a d×d factor matrix `B` (one row
/// per line; rows are normalized to unit length).
fn correlation(config: &Config, d: usize) -> CliResult<Correlation> {
    let raw = config.raw("correlation").unwrap_or("identity");
    if raw == "identity" {
        return Ok(Correlation::Identity);
    }
    if let Some(rho) = raw.strip_prefix("constant:") {
        let rho = rho.trim().parse::<f64>().map_err(|e| config.invalid("correlation", e))?;
        return Ok(Correlation::Constant(rho));
    }
    let rows = read_numbers(Path::new(raw))?;
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(config.invalid("correlation", format!("factor file `{raw}` must hold a {d}x{d} matrix")).into());
    }
    Ok(Correlation::Factor(Matrix::from_rows(&rows)))
}

pub fn model(config: &Config, d: usize) -> CliResult<BlackScholesModel> {
    let alpha = per_coordinate(config, "alpha", d, 0.02)?;
    let beta = per_coordinate(config, "beta", d, 0.2)?;
    Ok(BlackScholesModel::with_correlation(alpha, beta, correlation(config, d)?)?)
}

pub fn family(config: &Config) -> CliResult<PayoffFamily> {
    let raw = config.require_raw("payoff")?;
    PayoffFamily::from_str(raw).map_err(|e| config.invalid("payoff", e).into())
}

pub fn payoff(config: &Config, family: PayoffFamily, d: usize) -> CliResult<Payoff> {
    let strike = config.require::<f64>("strike")?;
    match weight_list(config)? {
        None => Ok(Payoff::equal_weights(family, d, strike)?),
        Some(w) if w.len() == d => Ok(Payoff::new(family, w, strike)?),
        Some(w) => Err(config.invalid("weights", format!("{} weights for dimension {d}", w.len())).into()),
    }
}

/// `uniform:U:V`, `points:PATH` (one point per line) or `lognormal:T0:X0`
/// (law of the model's value at `T0` started from `X0` in every coordinate).
pub fn measure(config: &Config, model: &BlackScholesModel) -> CliResult<MeasureSpec> {
    let d = model.dim();
    let raw = config.raw("measure").unwrap_or("uniform:0:1");
    let parts: Vec<&str> = raw.split(':').collect();
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| config.invalid("measure", format!("`{s}`: {e}")));
    let spec = match parts.as_slice() {
        ["uniform", u, v] => MeasureSpec::uniform(d, num(u)?, num(v)?),
        ["points", path] => {
            let pts = read_numbers(Path::new(path))?;
            if pts.iter().any(|p| p.len() != d) {
                return Err(config.invalid("measure", format!("points in `{path}` must have {d} coordinates")).into());
            }
            MeasureSpec::points(pts)
        }
        ["lognormal", t0, x0] => MeasureSpec::Lognormal { model: model.clone(), horizon: num(t0)?, x0: vec![num(x0)?; d] },
        _ => return Err(config.invalid("measure", "expected uniform:U:V, points:PATH or lognormal:T0:X0").into()),
    };
    spec.validate().map_err(|e| config.invalid("measure", e))?;
    Ok(spec)
}

pub fn horizon(config: &Config) -> CliResult<f64> {
    Ok(config.get_or("T", 1.0)?)
}

pub fn spec(config: &Config, family: PayoffFamily, d: usize, epsilon: f64) -> CliResult<ApproximationSpec> {
    let model = model(config, d)?;
    let measure = measure(config, &model)?;
    let payoff = payoff(config, family, d)?;
    let mut spec = ApproximationSpec::new(model, horizon(config)?, payoff, measure, epsilon);
    spec.p = config.get_or("p", spec.p)?;
    spec.mode = config.get_or::<Mode>("mode", spec.mode)?;
    spec.max_attempts = config.get_or("max_attempts", spec.max_attempts)?;
    spec.eval_samples = config.get_or("eval_samples", spec.eval_samples)?;
    spec.oracle_samples = config.get_or("oracle_samples", spec.oracle_samples)?;
    spec.n_cap = config.get_or("n_cap", spec.n_cap)?;
    spec.validate()?;
    Ok(spec)
}

/// Pricing oracle with the same seed derivation a build uses.
pub fn oracle(config: &Config, d: usize) -> CliResult<Oracle> {
    let model = model(config, d)?;
    let payoff = payoff(config, family(config)?, d)?;
    let settings = OracleSettings {
        samples: config.get_or("oracle_samples", 1_000_000usize)?,
        seed: oracle_seed(config.get_or("seed", 0u64)?),
    };
    Ok(oracle_for(&payoff, &model, horizon(config)?, settings)?)
}
