//! Reproducible parallel trial harness.
//!
//! Trial `t` draws from a ChaCha8 stream keyed by `(master_seed, t)`, so a
//! run is a pure function of its spec regardless of worker count. Trial
//! records are collected in index order and folded with integer
//! accumulators.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::connection::{ConnectionFunction, Family, ScalingRegime, DEFAULT_ALPHA};
use crate::discretize::{build_grid, collision_bound};
use crate::error::{Error, Result};
use crate::geometry::{sample_ppp, Torus};
use crate::graph::{
    is_connected, isolated_count, sample_edges, truncate_edges, SamplingMode, TrialSummary,
};
use crate::output::format_f64;
use crate::theory::{
    coupling_gap, expected_isolated, tv_distance, ChenSteinReport, CountDistribution, Law,
};

/// Multiplier for every confidence interval (99.7 %).
pub const CONFIDENCE_Z: f64 = 3.0;

pub const DEFAULT_MAX_NODE_TRIALS: f64 = 1e10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub tau: f64,
    #[serde(rename = "L")]
    pub length: f64,
    pub alpha: f64,
    pub family: Family,
    /// Also sample the truncated graph and record `Ñ_iso`.
    pub truncation: bool,
    pub mode: SamplingMode,
    pub trials: u64,
    pub master_seed: u64,
    /// Segment densities for the discretisation statistics.
    pub m_values: Vec<u64>,
    /// Cap on `L × trials`.
    pub max_node_trials: f64,
}

impl ExperimentSpec {
    pub fn new(tau: f64, length: f64, family: Family, trials: u64, master_seed: u64) -> Self {
        ExperimentSpec {
            tau,
            length,
            alpha: DEFAULT_ALPHA,
            family,
            truncation: false,
            mode: SamplingMode::default(),
            trials,
            master_seed,
            m_values: Vec::new(),
            max_node_trials: DEFAULT_MAX_NODE_TRIALS,
        }
    }

    pub fn validate(&self) -> Result<(ConnectionFunction, ScalingRegime)> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter {
                name: "trials",
                reason: "must be at least 1".into(),
            });
        }
        let cf = ConnectionFunction::from_family(self.family.clone())?;
        let regime = ScalingRegime::new(self.tau, self.length, &cf, self.alpha)?;
        if let SamplingMode::Windowed { epsilon } = self.mode {
            if !(epsilon > 0.0 && epsilon < 1.0) {
                return Err(Error::InvalidParameter {
                    name: "epsilon",
                    reason: format!("must lie in (0, 1), got {epsilon}"),
                });
            }
        }
        if !self.m_values.is_empty() && self.length.fract() != 0.0 {
            return Err(Error::InvalidParameter {
                name: "m",
                reason: format!("discretisation needs an integer L, got {}", self.length),
            });
        }
        if self.m_values.contains(&0) {
            return Err(Error::InvalidParameter {
                name: "m",
                reason: "segment density must be at least 1".into(),
            });
        }
        let requested = self.length * self.trials as f64;
        if requested > self.max_node_trials {
            return Err(Error::ResourceLimit {
                requested,
                limit: self.max_node_trials,
            });
        }
        Ok((cf, regime))
    }

    fn needs_truncated_graph(&self) -> bool {
        self.truncation || !self.m_values.is_empty()
    }
}

/// A proportion with its Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl Proportion {
    pub fn wilson(successes: u64, trials: u64) -> Self {
        let n = trials as f64;
        let p = successes as f64 / n;
        let z2 = CONFIDENCE_Z * CONFIDENCE_Z;
        let denom = 1.0 + z2 / n;
        let centre = (p + z2 / (2.0 * n)) / denom;
        let half = CONFIDENCE_Z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
        Proportion {
            successes,
            trials,
            estimate: p,
            ci_lo: (centre - half).clamp(0.0, p),
            ci_hi: (centre + half).clamp(p, 1.0),
        }
    }

    /// Binomial standard error at the point estimate.
    pub fn std_error(&self) -> f64 {
        (self.estimate * (1.0 - self.estimate) / self.trials as f64).sqrt()
    }
}

/// A sample mean with its standard error and normal interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl MeanEstimate {
    pub fn from_distribution(d: &CountDistribution) -> Self {
        let n = d.total() as f64;
        let mean = d.mean();
        let ss: f64 = d
            .counts()
            .iter()
            .map(|(&k, &c)| c as f64 * (k as f64 - mean).powi(2))
            .sum();
        let var = if d.total() > 1 { ss / (n - 1.0) } else { 0.0 };
        let std_error = (var / n).sqrt();
        MeanEstimate {
            mean,
            std_error,
            ci_lo: mean - CONFIDENCE_Z * std_error,
            ci_hi: mean + CONFIDENCE_Z * std_error,
        }
    }
}

/// Sampling spread of an empirical TV distance: `½ Σ_k sd(p̂_k)`.
pub fn tv_noise(d: &CountDistribution) -> f64 {
    let n = d.total() as f64;
    0.5 * d
        .counts()
        .keys()
        .map(|&k| {
            let p = d.pmf(k);
            (p * (1.0 - p) / n).sqrt()
        })
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub m: u64,
    pub w: u64,
    pub collision: bool,
}

/// Everything one trial contributes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub summary: TrialSummary,
    pub grids: Vec<GridOutcome>,
}

impl TrialRecord {
    pub fn violations(&self) -> u64 {
        let mut v = self.summary.violations();
        if let Some(t) = self.summary.n_iso_truncated {
            v += self
                .grids
                .iter()
                .filter(|g| !g.collision && g.w != t)
                .count() as u64;
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationStats {
    pub m: u64,
    pub collision_bound: f64,
    pub p_collision: Proportion,
    /// `P(W ≠ Ñ_iso)`
    pub p_mismatch: Proportion,
    /// Empirical `d_TV(Ñ_iso, W)`.
    pub tv_truncated_w: f64,
    pub mean_w: MeanEstimate,
    pub distribution_w: CountDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub tau: f64,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "R_L")]
    pub radius: f64,
    pub trials: u64,
    pub distribution: CountDistribution,
    pub p_no_isolated: Proportion,
    pub p_connected: Proportion,
    pub mean_n_iso: MeanEstimate,
    pub expected_n_iso: f64,
    /// Empirical `d_TV(N_iso, Po(1/τ))` and its sampling spread.
    pub tv_poisson: f64,
    pub tv_poisson_noise: f64,
    pub distribution_truncated: Option<CountDistribution>,
    pub mean_n_iso_truncated: Option<MeanEstimate>,
    pub expected_n_iso_truncated: f64,
    /// Mean of `Ñ_iso − N_iso` over coupled trials.
    pub coupling_difference: Option<MeanEstimate>,
    /// `P(Ñ_iso ≠ N_iso)`
    pub p_coupling_mismatch: Option<Proportion>,
    pub violations: u64,
    pub discretization: Vec<DiscretizationStats>,
    #[serde(skip)]
    pub trial_summaries: Vec<TrialSummary>,
}

/// Child stream for trial `t`: the master seed picks the key, the trial
/// index the ChaCha stream.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

pub fn run_trial(
    spec: &ExperimentSpec,
    cf: &ConnectionFunction,
    regime: &ScalingRegime,
    trial: u64,
) -> Result<TrialRecord> {
    let mut rng = trial_rng(spec.master_seed, trial);
    let torus = Torus::new(spec.length)?;
    let config = sample_ppp(&torus, &mut rng);
    let g = sample_edges(config, cf, regime, &mut rng, spec.mode)?;
    let mut summary = TrialSummary {
        n_nodes: g.node_count() as u64,
        n_iso: isolated_count(&g),
        n_iso_truncated: None,
        connected: is_connected(&g),
    };
    let mut grids = Vec::with_capacity(spec.m_values.len());
    if spec.needs_truncated_graph() {
        let tg = truncate_edges(&g, regime.cutoff);
        summary.n_iso_truncated = Some(isolated_count(&tg));
        for &m in &spec.m_values {
            let grid = build_grid(&tg, m, regime.cutoff)?;
            grids.push(GridOutcome {
                m,
                w: grid.w,
                collision: grid.collision,
            });
        }
    }
    Ok(TrialRecord { summary, grids })
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter {
            name: "workers",
            reason: e.to_string(),
        })
}

/// Trial records `0..spec.trials`, in index order.
pub fn collect_trials(spec: &ExperimentSpec, workers: usize) -> Result<Vec<TrialRecord>> {
    let (cf, regime) = spec.validate()?;
    thread_pool(workers)?.install(|| {
        (0..spec.trials)
            .into_par_iter()
            .map(|t| run_trial(spec, &cf, &regime, t))
            .collect()
    })
}

/// Integer tallies; merging is associative and commutative.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tally {
    pub trials: u64,
    pub n_iso: CountDistribution,
    pub n_iso_truncated: CountDistribution,
    pub difference: CountDistribution,
    pub no_isolated: u64,
    pub connected: u64,
    pub coupling_mismatch: u64,
    pub violations: u64,
    pub per_m: Vec<MTally>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MTally {
    pub m: u64,
    pub w: CountDistribution,
    pub collisions: u64,
    pub mismatches: u64,
}

impl Tally {
    pub fn for_spec(spec: &ExperimentSpec) -> Self {
        Tally {
            per_m: spec
                .m_values
                .iter()
                .map(|&m| MTally {
                    m,
                    ..MTally::default()
                })
                .collect(),
            ..Tally::default()
        }
    }

    pub fn add(&mut self, rec: &TrialRecord) {
        let s = &rec.summary;
        self.trials += 1;
        self.n_iso.record(s.n_iso);
        self.no_isolated += (s.n_iso == 0) as u64;
        self.connected += s.connected as u64;
        self.violations += rec.violations();
        if let Some(t) = s.n_iso_truncated {
            self.n_iso_truncated.record(t);
            self.difference.record(t.saturating_sub(s.n_iso));
            self.coupling_mismatch += (t != s.n_iso) as u64;
            for (acc, g) in self.per_m.iter_mut().zip(&rec.grids) {
                acc.w.record(g.w);
                acc.collisions += g.collision as u64;
                acc.mismatches += (g.w != t) as u64;
            }
        }
    }

    pub fn merge(&mut self, other: &Tally) {
        self.trials += other.trials;
        self.n_iso.merge(&other.n_iso);
        self.n_iso_truncated.merge(&other.n_iso_truncated);
        self.difference.merge(&other.difference);
        self.no_isolated += other.no_isolated;
        self.connected += other.connected;
        self.coupling_mismatch += other.coupling_mismatch;
        self.violations += other.violations;
        if self.per_m.is_empty() {
            self.per_m = other.per_m.clone();
        } else {
            for (a, b) in self.per_m.iter_mut().zip(&other.per_m) {
                a.w.merge(&b.w);
                a.collisions += b.collisions;
                a.mismatches += b.mismatches;
            }
        }
    }
}

pub fn summarize(spec: &ExperimentSpec, tally: &Tally) -> Result<ExperimentResult> {
    let (cf, regime) = spec.validate()?;
    let n = tally.trials;
    let truncated = !tally.n_iso_truncated.is_empty();
    let discretization = tally
        .per_m
        .iter()
        .filter(|acc| !acc.w.is_empty())
        .map(|acc| {
            Ok(DiscretizationStats {
                m: acc.m,
                collision_bound: collision_bound(acc.m, spec.length as u64),
                p_collision: Proportion::wilson(acc.collisions, n),
                p_mismatch: Proportion::wilson(acc.mismatches, n),
                tv_truncated_w: tv_distance(
                    Law::Empirical(&tally.n_iso_truncated),
                    Law::Empirical(&acc.w),
                )?,
                mean_w: MeanEstimate::from_distribution(&acc.w),
                distribution_w: acc.w.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult {
        tau: spec.tau,
        length: spec.length,
        radius: regime.radius,
        trials: n,
        distribution: tally.n_iso.clone(),
        p_no_isolated: Proportion::wilson(tally.no_isolated, n),
        p_connected: Proportion::wilson(tally.connected, n),
        mean_n_iso: MeanEstimate::from_distribution(&tally.n_iso),
        expected_n_iso: expected_isolated(&regime, &cf, false)?,
        tv_poisson: tv_distance(Law::Empirical(&tally.n_iso), Law::Poisson(1.0 / spec.tau))?,
        tv_poisson_noise: tv_noise(&tally.n_iso),
        distribution_truncated: truncated.then(|| tally.n_iso_truncated.clone()),
        mean_n_iso_truncated: truncated
            .then(|| MeanEstimate::from_distribution(&tally.n_iso_truncated)),
        expected_n_iso_truncated: expected_isolated(&regime, &cf, true)?,
        coupling_difference: truncated.then(|| MeanEstimate::from_distribution(&tally.difference)),
        p_coupling_mismatch: truncated.then(|| Proportion::wilson(tally.coupling_mismatch, n)),
        violations: tally.violations,
        discretization,
        trial_summaries: Vec::new(),
    })
}

/// Run `spec.trials` independent trials on `workers` threads.
pub fn run_trials(spec: &ExperimentSpec, workers: usize) -> Result<ExperimentResult> {
    let records = collect_trials(spec, workers)?;
    let mut tally = Tally::for_spec(spec);
    for rec in &records {
        tally.add(rec);
    }
    let mut result = summarize(spec, &tally)?;
    result.trial_summaries = records.into_iter().map(|r| r.summary).collect();
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "R_L")]
    pub radius: f64,
    pub result: ExperimentResult,
    pub bounds: ChenSteinReport,
    pub coupling_gap: f64,
}

/// One experiment per length, each paired with its bound report.
pub fn sweep(
    base: &ExperimentSpec,
    lengths: &[f64],
    workers: usize,
    bound_m: u64,
) -> Result<Vec<SweepRow>> {
    lengths
        .iter()
        .map(|&length| {
            let spec = ExperimentSpec {
                length,
                ..base.clone()
            };
            let (cf, regime) = spec.validate()?;
            let result = run_trials(&spec, workers)?;
            Ok(SweepRow {
                length,
                radius: regime.radius,
                bounds: ChenSteinReport::evaluate(&regime, &cf, bound_m)?,
                coupling_gap: coupling_gap(&regime, &cf)?,
                result,
            })
        })
        .collect()
}

pub const SWEEP_CSV_HEADER: &str = "L,R_L,trials,mean_n_iso,expected_n_iso,p_no_isolated,ci_lo,ci_hi,p_connected,tv_empirical,b1,b2_upper,b3,tv_chen_stein";

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for row in rows {
        let r = &row.result;
        let fields = [
            format_f64(row.length),
            format_f64(row.radius),
            r.trials.to_string(),
            format_f64(r.mean_n_iso.mean),
            format_f64(r.expected_n_iso),
            format_f64(r.p_no_isolated.estimate),
            format_f64(r.p_no_isolated.ci_lo),
            format_f64(r.p_no_isolated.ci_hi),
            format_f64(r.p_connected.estimate),
            format_f64(r.tv_poisson),
            format_f64(row.bounds.b1),
            format_f64(row.bounds.b2_upper),
            format_f64(row.bounds.b3),
            format_f64(row.bounds.tv_upper),
        ];
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

pub const TRIALS_CSV_HEADER: &str = "trial,n_nodes,n_iso,n_iso_truncated,connected";

pub fn write_trials_csv<W: Write>(summaries: &[TrialSummary], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{TRIALS_CSV_HEADER}")?;
    for (t, s) in summaries.iter().enumerate() {
        let trunc = s.n_iso_truncated.map(|v| v.to_string()).unwrap_or_default();
        writeln!(out, "{t},{},{},{trunc},{}", s.n_nodes, s.n_iso, s.connected)?;
    }
    Ok(())
}
