//! Subcommand bodies. Each returns the bytes to emit so the caller decides
//! where they go.

use serde::Serialize;
use softrgg::montecarlo::{write_sweep_csv, write_trials_csv};
use softrgg::output::{format_f64, write_json};
use softrgg::theory::truncated_norm_ratios;
use softrgg::{
    coupling_gap, expected_isolated, run_trials, sweep, ChenSteinReport, ExperimentResult,
    ExperimentSpec, ScalingRegime,
};

use crate::config::{ConfigError, Format, RunConfig};

/// Environment variable capping the worker count, whatever `--workers` or
/// the config ask for.
pub const WORKER_CAP_VAR: &str = "SOFTRGG_MAX_WORKERS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] softrgg::Error),
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0} verification check(s) failed")]
    Verification(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Verification(_) => 3,
            CliError::Run(_) | CliError::Io(_) => 1,
        }
    }
}

/// Requested workers (flag, then config, then available cores), capped by
/// `cap` when the environment sets one.
pub fn resolve_workers(requested: Option<usize>, cap: Option<&str>) -> Result<usize, ConfigError> {
    let base =
        requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if base == 0 {
        return Err(ConfigError::Semantic {
            key: "workers".into(),
            message: "must be at least 1".into(),
        });
    }
    match cap {
        None => Ok(base),
        Some(raw) => match raw.trim().parse::<usize>() {
            Ok(c) if c >= 1 => Ok(base.min(c)),
            _ => Err(ConfigError::Semantic {
                key: WORKER_CAP_VAR.into(),
                message: format!("expected a positive integer, got {raw:?}"),
            }),
        },
    }
}

fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_json(value, &mut buf).map_err(std::io::Error::from)?;
    buf.push(b'\n');
    Ok(buf)
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    spec: &'a ExperimentSpec,
    result: &'a ExperimentResult,
}

/// JSON: spec and summary. CSV: one row per trial.
pub fn simulate(config: &RunConfig, workers: usize) -> Result<Vec<u8>, CliError> {
    let spec = config.spec(config.length)?;
    let result = run_trials(&spec, workers)?;
    match config.format {
        Format::Json => json_bytes(&SimulateOutput {
            spec: &spec,
            result: &result,
        }),
        Format::Csv => {
            let mut buf = Vec::new();
            write_trials_csv(&result.trial_summaries, &mut buf)?;
            Ok(buf)
        }
    }
}

pub fn sweep_table(config: &RunConfig, workers: usize) -> Result<Vec<u8>, CliError> {
    let spec = config.spec(config.length)?;
    let rows = sweep(&spec, &config.sweep_lengths(), workers, config.bound_m)?;
    match config.format {
        Format::Json => json_bytes(&rows),
        Format::Csv => {
            let mut buf = Vec::new();
            write_sweep_csv(&rows, &mut buf)?;
            Ok(buf)
        }
    }
}

#[derive(Debug, Serialize)]
pub struct BoundsRow {
    #[serde(rename = "R_L")]
    pub radius: f64,
    pub cutoff: f64,
    #[serde(flatten)]
    pub report: ChenSteinReport,
    pub expected_n_iso: f64,
    pub expected_n_iso_truncated: f64,
    pub coupling_gap: f64,
    /// `(1/R_L)∫h̃` and `(1/R_L)∫h̃²`.
    pub h1_ratio: f64,
    pub h2_ratio: f64,
}

pub const BOUNDS_CSV_HEADER: &str = "L,R_L,cutoff,b1,b1_single_factor,b2_upper,b3,b3_valid,expected_W,p_limit,tv_chen_stein,expected_n_iso,expected_n_iso_truncated,coupling_gap,h1_ratio,h2_ratio";

pub fn bounds_rows(config: &RunConfig) -> Result<Vec<BoundsRow>, CliError> {
    let cf = config.connection_function()?;
    config
        .sweep_lengths()
        .into_iter()
        .map(|length| {
            let regime = ScalingRegime::new(config.tau, length, &cf, config.alpha)?;
            let (h1_ratio, h2_ratio) = truncated_norm_ratios(&regime, &cf)?;
            Ok(BoundsRow {
                radius: regime.radius,
                cutoff: regime.cutoff,
                report: ChenSteinReport::evaluate(&regime, &cf, config.bound_m)?,
                expected_n_iso: expected_isolated(&regime, &cf, false)?,
                expected_n_iso_truncated: expected_isolated(&regime, &cf, true)?,
                coupling_gap: coupling_gap(&regime, &cf)?,
                h1_ratio,
                h2_ratio,
            })
        })
        .collect()
}

pub fn bounds(config: &RunConfig) -> Result<Vec<u8>, CliError> {
    let rows = bounds_rows(config)?;
    match config.format {
        Format::Json => json_bytes(&rows),
        Format::Csv => {
            let mut out = format!("{BOUNDS_CSV_HEADER}\n");
            for r in &rows {
                let b = &r.report;
                let fields = [
                    format_f64(b.length),
                    format_f64(r.radius),
                    format_f64(r.cutoff),
                    format_f64(b.b1),
                    format_f64(b.b1_single_factor),
                    format_f64(b.b2_upper),
                    format_f64(b.b3),
                    b.b3_valid.to_string(),
                    format_f64(b.expected_w),
                    format_f64(b.p_limit),
                    format_f64(b.tv_upper),
                    format_f64(r.expected_n_iso),
                    format_f64(r.expected_n_iso_truncated),
                    format_f64(r.coupling_gap),
                    format_f64(r.h1_ratio),
                    format_f64(r.h2_ratio),
                ];
                out.push_str(&fields.join(","));
                out.push('\n');
            }
            Ok(out.into_bytes())
        }
    }
}
