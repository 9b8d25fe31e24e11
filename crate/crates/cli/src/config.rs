//! TOML experiment configuration.
//!
//! A file either describes one experiment at the top level or lists several
//! under `[[suite]]`; top-level keys other than `seed`, `out` and
//! `[tolerances]` act as defaults for every suite entry.

use std::f64::consts::PI;
use std::path::Path;

use cgolab_core::recovery::{Bump, ConductivitySpec};
use serde::{Deserialize, Serialize};

use crate::catalog;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("{context}field `{field}`: {reason}")]
    Field {
        context: String,
        field: String,
        reason: String,
    },
}

fn field_error(context: &str, field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        context: context.to_string(),
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// Box length: a number or one of `"pi"`, `"2pi"`, `"2*pi"`.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Length {
    Number(f64),
    Text(String),
}

impl Length {
    pub fn value(&self) -> Option<f64> {
        match self {
            Self::Number(v) => Some(*v),
            Self::Text(t) => {
                let t: String = t.chars().filter(|c| !c.is_whitespace()).collect();
                let t = t.to_ascii_lowercase();
                let coeff = t.strip_suffix("pi")?.trim_end_matches('*');
                if coeff.is_empty() {
                    Some(PI)
                } else {
                    coeff.parse::<f64>().ok().map(|c| c * PI)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BumpConfig {
    pub amplitude: f64,
    pub width: f64,
    pub offset: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GammaConfig {
    Uniform,
    Bumps { bumps: Vec<BumpConfig> },
    Rough { s: f64, p: f64, amplitude: f64 },
}

impl GammaConfig {
    pub fn spec(&self) -> ConductivitySpec {
        match self {
            Self::Uniform => ConductivitySpec::Uniform,
            Self::Bumps { bumps } => ConductivitySpec::Bumps(
                bumps
                    .iter()
                    .map(|b| Bump {
                        offset: b.offset.clone(),
                        amplitude: b.amplitude,
                        width: b.width,
                    })
                    .collect(),
            ),
            &Self::Rough { s, p, amplitude } => ConductivitySpec::Rough { s, p, amplitude },
        }
    }
}

/// Numerical tolerances and gate thresholds. These are the only settings
/// with defaults; all of them are echoed into the manifest.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub cgo_tol: f64,
    pub cgo_max_iter: usize,
    pub power_max_iter: usize,
    pub power_stagnation: f64,
    /// Require `nyquist_headroom · max τ ≤ ξ_max`.
    pub nyquist_headroom: f64,
    pub isometry_tol: f64,
    pub conjugation_tol: f64,
    pub residual_tol: f64,
    pub bookkeeping_tol: f64,
    pub null_gap_tol: f64,
    pub gaidentity_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            cgo_tol: 1e-10,
            cgo_max_iter: 100,
            power_max_iter: 60,
            power_stagnation: 1e-4,
            nyquist_headroom: 1.0,
            isometry_tol: 1e-10,
            conjugation_tol: 1e-11,
            residual_tol: 1e-8,
            bookkeeping_tol: 1e-10,
            null_gap_tol: 1e-12,
            gaidentity_tol: 1e-6,
        }
    }
}

/// One experiment. Which keys are required depends on the experiment; see
/// [`catalog::CATALOG`].
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub n: Option<usize>,
    #[serde(rename = "N")]
    pub size: Option<usize>,
    #[serde(rename = "L")]
    pub length: Option<Length>,
    pub tau: Option<Vec<f64>>,
    #[serde(rename = "M")]
    pub m: Option<Vec<f64>>,
    pub r: Option<f64>,
    pub samples: Option<usize>,
    pub trials: Option<usize>,
    pub zetas: Option<usize>,
    pub lambda: Option<u64>,
    pub lambdas: Option<Vec<u64>>,
    pub ratios: Option<Vec<u64>>,
    pub p: Option<f64>,
    pub theta: Option<f64>,
    pub tau_exponents: Option<Vec<u32>>,
    pub band: Option<f64>,
    pub radius: Option<f64>,
    pub width: Option<f64>,
    pub eps_ball: Option<f64>,
    pub gamma: Option<GammaConfig>,
    pub gamma2: Option<GammaConfig>,
}

impl ExperimentConfig {
    fn has(&self, key: &str) -> bool {
        match key {
            "n" => self.n.is_some(),
            "N" => self.size.is_some(),
            "L" => self.length.is_some(),
            "tau" => self.tau.is_some(),
            "M" => self.m.is_some(),
            "r" => self.r.is_some(),
            "samples" => self.samples.is_some(),
            "trials" => self.trials.is_some(),
            "zetas" => self.zetas.is_some(),
            "lambda" => self.lambda.is_some(),
            "lambdas" => self.lambdas.is_some(),
            "ratios" => self.ratios.is_some(),
            "p" => self.p.is_some(),
            "theta" => self.theta.is_some(),
            "tau_exponents" => self.tau_exponents.is_some(),
            "band" => self.band.is_some(),
            "radius" => self.radius.is_some(),
            "width" => self.width.is_some(),
            "eps_ball" => self.eps_ball.is_some(),
            "gamma" => self.gamma.is_some(),
            "gamma2" => self.gamma2.is_some(),
            _ => false,
        }
    }

    /// Largest phase parameter the experiment will use.
    pub fn max_tau(&self) -> Option<f64> {
        let taus = self.tau.iter().flatten().copied();
        let ms = self.m.iter().flatten().map(|m| 2.0 * m);
        taus.chain(ms).reduce(f64::max)
    }

    pub fn length_value(&self) -> Option<f64> {
        self.length.as_ref().and_then(Length::value)
    }
}

/// A parsed and validated configuration file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub seed: u64,
    pub out: Option<String>,
    pub tolerances: Tolerances,
    pub experiments: Vec<ExperimentConfig>,
}

fn take_seed(table: &mut toml::Table) -> Result<Option<u64>, ConfigError> {
    match table.remove("seed") {
        None => Ok(None),
        Some(toml::Value::Integer(v)) if v >= 0 => Ok(Some(v as u64)),
        Some(other) => Err(field_error("", "seed", format!("must be a non-negative integer, got {other}"))),
    }
}

impl Config {
    pub fn from_path(path: &Path, seed_override: Option<u64>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, seed_override)
    }

    pub fn parse(text: &str, seed_override: Option<u64>) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let seed = take_seed(&mut table)?;
        let seed = seed_override
            .or(seed)
            .ok_or_else(|| field_error("", "seed", "missing (pass one in the file or with --seed)"))?;
        let out = match table.remove("out") {
            None => None,
            Some(toml::Value::String(s)) => Some(s),
            Some(other) => return Err(field_error("", "out", format!("must be a string, got {other}"))),
        };
        let tolerances = match table.remove("tolerances") {
            None => Tolerances::default(),
            Some(v) => v
                .try_into()
                .map_err(|e: toml::de::Error| field_error("", "tolerances", e.message().to_string()))?,
        };
        let entries = match table.remove("suite") {
            None => vec![("".to_string(), table)],
            Some(toml::Value::Array(items)) => items
                .into_iter()
                .enumerate()
                .map(|(i, item)| match item {
                    toml::Value::Table(t) => {
                        let mut merged = table.clone();
                        merged.extend(t);
                        Ok((format!("suite[{i}]: "), merged))
                    }
                    _ => Err(field_error("", "suite", format!("entry {i} is not a table"))),
                })
                .collect::<Result<Vec<_>, _>>()?,
            Some(_) => return Err(field_error("", "suite", "must be an array of tables")),
        };
        let mut experiments = Vec::new();
        for (context, t) in entries {
            let exp: ExperimentConfig = toml::Value::Table(t)
                .try_into()
                .map_err(|e: toml::de::Error| ConfigError::Parse(format!("{context}{}", e.message())))?;
            validate(&exp, &tolerances, &context)?;
            experiments.push(exp);
        }
        if experiments.is_empty() {
            return Err(field_error("", "suite", "no experiments"));
        }
        Ok(Self {
            seed,
            out,
            tolerances,
            experiments,
        })
    }
}

fn validate(exp: &ExperimentConfig, tol: &Tolerances, context: &str) -> Result<(), ConfigError> {
    let ctx = format!("{context}experiment `{}`: ", exp.experiment);
    let entry = catalog::find(&exp.experiment).ok_or_else(|| {
        field_error(
            context,
            "experiment",
            format!("unknown experiment `{}` (see `cgolab list`)", exp.experiment),
        )
    })?;
    for key in entry.required {
        if !exp.has(key) {
            return Err(field_error(&ctx, key, "missing"));
        }
    }
    if let Some(n) = exp.n {
        if !(2..=8).contains(&n) {
            return Err(field_error(&ctx, "n", format!("must lie in 2..=8, got {n}")));
        }
    }
    if let Some(size) = exp.size {
        if !size.is_power_of_two() || !(8..=256).contains(&size) {
            return Err(field_error(&ctx, "N", format!("must be a power of two in 8..=256, got {size}")));
        }
    }
    if let Some(l) = &exp.length {
        match l.value() {
            Some(v) if v > 0.0 && v.is_finite() => {}
            _ => return Err(field_error(&ctx, "L", format!("must be a positive number or a multiple of pi, got {l:?}"))),
        }
    }
    if let (Some(size), Some(len), Some(top)) = (exp.size, exp.length_value(), exp.max_tau()) {
        let nyquist = size as f64 / 2.0 * 2.0 * PI / len;
        if tol.nyquist_headroom * top > nyquist {
            let field = if exp.tau.is_some() { "tau" } else { "M" };
            return Err(field_error(
                &ctx,
                field,
                format!(
                    "Nyquist violation: {} x max tau = {} exceeds xi_max = {nyquist}",
                    tol.nyquist_headroom,
                    tol.nyquist_headroom * top
                ),
            ));
        }
    }
    for (key, list) in [("tau", &exp.tau), ("M", &exp.m)] {
        if let Some(v) = list {
            if v.is_empty() || v.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
                return Err(field_error(&ctx, key, "must be a non-empty list of positive numbers"));
            }
        }
    }
    for (key, value) in [("samples", exp.samples), ("trials", exp.trials), ("zetas", exp.zetas)] {
        if value == Some(0) {
            return Err(field_error(&ctx, key, "must be positive"));
        }
    }
    Ok(())
}
