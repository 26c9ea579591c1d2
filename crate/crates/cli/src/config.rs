//! Run configuration: a flat TOML document of `key = value` lines.
//!
//! ```toml
//! tau = 1.0
//! L = 1000.0
//! family = "rayleigh"   # rayleigh | exponential | hard | tabulated
//! trials = 1000
//! seed = 42
//! ```
//!
//! Optional keys and their defaults: `alpha = 1.0`, `mode = "windowed"`,
//! `epsilon = 1e-12`, `truncation = false`, `m = []`, `bound_m = 2`,
//! `L_values = []`, `max_node_trials = 1e10`, `format = "json"`, plus
//! `r_c` (hard family), `table` (tabulated family, a two-column CSV path),
//! `out` and `workers`.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use softrgg::graph::DEFAULT_EPSILON;
use softrgg::montecarlo::DEFAULT_MAX_NODE_TRIALS;
use softrgg::{ConnectionFunction, Error as CoreError, ExperimentSpec, Family, SamplingMode};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    /// Carries the parser's message, which includes line and column.
    #[error("config syntax error: {0}")]
    Syntax(String),
    #[error("config error: key `{key}`: {message}")]
    Semantic { key: String, message: String },
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl ConfigError {
    fn semantic(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Semantic {
            key: key.to_string(),
            message: message.into(),
        }
    }

    /// Attach a core validation error to the key that caused it.
    fn from_core(err: CoreError) -> Self {
        let key = match &err {
            CoreError::InvalidParameter { name, .. } => *name,
            CoreError::InvalidLength(_) | CoreError::InvalidRegime { .. } => "L",
            CoreError::ResourceLimit { .. } => "max_node_trials",
            CoreError::InvalidTable(_) | CoreError::DivergentTail { .. } | CoreError::Csv(_) => {
                "table"
            }
            _ => "family",
        };
        let message = match err {
            CoreError::InvalidParameter { name, reason } => format!("{name} {reason}"),
            other => other.to_string(),
        };
        ConfigError::semantic(key, message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Rayleigh,
    Exponential,
    Hard,
    Tabulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Exact,
    #[default]
    Windowed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Csv => "csv",
        })
    }
}

/// What the configuration will be used for; bound evaluation adds
/// requirements on the connection function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Simulate,
    Sweep,
    Bounds,
}

fn default_alpha() -> f64 {
    softrgg::connection::DEFAULT_ALPHA
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_trials() -> u64 {
    1000
}

fn default_bound_m() -> u64 {
    2
}

fn default_max_node_trials() -> f64 {
    DEFAULT_MAX_NODE_TRIALS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub tau: f64,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub family: FamilyName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
    #[serde(default)]
    pub truncation: bool,
    #[serde(default)]
    pub mode: ModeName,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    /// Segment densities for the discretisation statistics.
    #[serde(default)]
    pub m: Vec<u64>,
    /// Segment density at which the bound report checks `b3`.
    #[serde(default = "default_bound_m")]
    pub bound_m: u64,
    /// Torus lengths for `sweep` and `bounds`; empty means `[L]`.
    #[serde(default, rename = "L_values")]
    pub lengths: Vec<f64>,
    #[serde(default = "default_max_node_trials")]
    pub max_node_trials: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

/// Parse and validate configuration text, applying defaults.
pub fn parse_config(source: &str) -> Result<RunConfig, ConfigError> {
    let config: RunConfig =
        toml::from_str(source).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Read a config file; a relative `table` path is taken relative to the
/// file's directory.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut config: RunConfig =
        toml::from_str(&text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    if let (Some(table), Some(dir)) = (&config.table, path.parent()) {
        if table.is_relative() {
            config.table = Some(dir.join(table));
        }
    }
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    /// Render as TOML; [`parse_config`] reads it back unchanged.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    /// The configured lengths for multi-length commands.
    pub fn sweep_lengths(&self) -> Vec<f64> {
        if self.lengths.is_empty() {
            vec![self.length]
        } else {
            self.lengths.clone()
        }
    }

    pub fn connection_function(&self) -> Result<ConnectionFunction, ConfigError> {
        let cf = match self.family {
            FamilyName::Rayleigh => ConnectionFunction::rayleigh(),
            FamilyName::Exponential => ConnectionFunction::exponential(),
            FamilyName::Hard => {
                let r_c = self
                    .r_c
                    .ok_or_else(|| ConfigError::semantic("r_c", "required for the hard family"))?;
                ConnectionFunction::hard(r_c).map_err(|e| match e {
                    CoreError::InvalidParameter { reason, .. } => {
                        ConfigError::semantic("r_c", reason)
                    }
                    other => ConfigError::from_core(other),
                })?
            }
            FamilyName::Tabulated => {
                let path = self.table.as_ref().ok_or_else(|| {
                    ConfigError::semantic("table", "required for the tabulated family")
                })?;
                ConnectionFunction::from_csv_path(path).map_err(|e| {
                    ConfigError::semantic("table", format!("{}: {e}", path.display()))
                })?
            }
        };
        Ok(cf)
    }

    /// The harness spec for one torus length.
    pub fn spec(&self, length: f64) -> Result<ExperimentSpec, ConfigError> {
        let family: Family = self.connection_function()?.family().clone();
        Ok(ExperimentSpec {
            tau: self.tau,
            length,
            alpha: self.alpha,
            family,
            truncation: self.truncation,
            mode: match self.mode {
                ModeName::Exact => SamplingMode::Exact,
                ModeName::Windowed => SamplingMode::Windowed {
                    epsilon: self.epsilon,
                },
            },
            trials: self.trials,
            master_seed: self.seed,
            m_values: self.m.clone(),
            max_node_trials: self.max_node_trials,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.r_c.is_some() && self.family != FamilyName::Hard {
            return Err(ConfigError::semantic(
                "r_c",
                "only valid with family = \"hard\"",
            ));
        }
        if self.table.is_some() && self.family != FamilyName::Tabulated {
            return Err(ConfigError::semantic(
                "table",
                "only valid with family = \"tabulated\"",
            ));
        }
        if self.bound_m == 0 {
            return Err(ConfigError::semantic("bound_m", "must be at least 1"));
        }
        if self.workers == Some(0) {
            return Err(ConfigError::semantic("workers", "must be at least 1"));
        }
        if self.max_node_trials.is_nan() || self.max_node_trials <= 0.0 {
            return Err(ConfigError::semantic("max_node_trials", "must be positive"));
        }
        // the core validation covers tau, L, alpha, epsilon, trials and m
        self.spec(self.length)?
            .validate()
            .map_err(ConfigError::from_core)?;
        for &length in &self.lengths {
            self.spec(length)?
                .validate()
                .map_err(|e| match ConfigError::from_core(e) {
                    ConfigError::Semantic { key, message } if key == "L" => {
                        ConfigError::semantic("L_values", message)
                    }
                    other => other,
                })?;
        }
        Ok(())
    }

    /// Checks that depend on the subcommand: bound evaluation needs a
    /// connection function that satisfies the integrability assumptions.
    pub fn validate_for(&self, purpose: Purpose) -> Result<(), ConfigError> {
        if matches!(purpose, Purpose::Sweep | Purpose::Bounds) {
            let report = self.connection_function()?.check_assumptions();
            if !report.pass {
                return Err(ConfigError::semantic(
                    "family",
                    format!(
                        "{} connection function fails the assumption \
                         ‖H‖₂² < ‖H‖₁ required for bound evaluation (margin {:.3e})",
                        self.connection_function()?.family().name(),
                        report.margin
                    ),
                ));
            }
        }
        Ok(())
    }
}
