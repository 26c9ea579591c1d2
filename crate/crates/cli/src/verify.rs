//! Desk-scale versions of the acceptance checks: the same ten properties
//! with trial counts small enough to finish in well under a minute.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use softrgg::graph::is_connected_bfs;
use softrgg::montecarlo::write_sweep_csv;
use softrgg::output::to_json_string;
use softrgg::theory::truncated_norm_ratios;
use softrgg::{
    b1_limit, b2_upper, b3_value, collision_bound, coupling_gap, evaluate_scaled, is_connected,
    run_trials, sample_edges, sweep, ConnectionFunction, ExperimentResult, ExperimentSpec, Family,
    GraphSample, PointConfiguration, SamplingMode, ScalingRegime, Torus,
};

const SIGMAS: f64 = 3.0;
/// `b1` at `L = 10⁴`, `τ = α = 1`, Rayleigh, from an independent evaluation.
const B1_AT_1E4: f64 = 0.016_201_407_207_462_3;
/// `E[Ñ_iso] − E[N_iso]` at `L = 100`, same regime.
const GAP_AT_100: f64 = 0.001_098_541_918_553_38;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn rayleigh(length: f64) -> (ScalingRegime, ConnectionFunction) {
    let cf = ConnectionFunction::rayleigh();
    let regime = ScalingRegime::new(1.0, length, &cf, 1.0).expect("valid regime");
    (regime, cf)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn binomial_sd(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

fn mean_law(r: &ExperimentResult) -> Check {
    let diff = (r.mean_n_iso.mean - r.expected_n_iso).abs();
    Check {
        id: 1,
        name: "mean law",
        pass: diff <= SIGMAS * r.mean_n_iso.std_error,
        detail: format!(
            "L={} mean {:.4} vs {:.4} (3 SE {:.4})",
            r.length,
            r.mean_n_iso.mean,
            r.expected_n_iso,
            SIGMAS * r.mean_n_iso.std_error
        ),
    }
}

fn no_isolated(r: &ExperimentResult) -> Check {
    let p = r.p_no_isolated.estimate;
    let target = (-1f64).exp();
    // finite-size allowance on top of sampling noise
    let tol = 0.02 + SIGMAS * binomial_sd(target, r.trials);
    Check {
        id: 2,
        name: "P(no isolated) -> e^-1",
        pass: (p - target).abs() <= tol,
        detail: format!(
            "L={} p {:.4} vs {:.4} (tol {:.4})",
            r.length, p, target, tol
        ),
    }
}

fn tv_trend(small: &ExperimentResult, large: &ExperimentResult) -> Check {
    let allowance = 2.0 * small.tv_poisson_noise.max(large.tv_poisson_noise);
    Check {
        id: 3,
        name: "TV trend",
        pass: large.tv_poisson <= small.tv_poisson + allowance,
        detail: format!(
            "TV at L={}: {:.4}, L={}: {:.4} (allowance {:.4})",
            small.length, small.tv_poisson, large.length, large.tv_poisson, allowance
        ),
    }
}

fn connectivity(results: &[&ExperimentResult]) -> Check {
    let violations: u64 = results.iter().map(|r| r.violations).sum();
    let ordered = results
        .iter()
        .all(|r| r.p_connected.estimate <= r.p_no_isolated.estimate);
    Check {
        id: 4,
        name: "connected implies no isolated node",
        pass: violations == 0 && ordered,
        detail: format!("{violations} violations, p_connected <= p_no_isolated: {ordered}"),
    }
}

fn chen_stein() -> softrgg::Result<Check> {
    let mut b1 = Vec::new();
    let mut b2 = Vec::new();
    let mut b3_ok = true;
    for length in [1e4, 1e6, 1e8] {
        let (regime, cf) = rayleigh(length);
        b1.push(b1_limit(&regime, &cf)?.b1);
        b2.push(b2_upper(&regime, &cf)?);
        for m in [2, 16] {
            let b3 = b3_value(&regime, m);
            b3_ok &= b3.valid && b3.value == 0;
        }
    }
    let decreasing = b1.windows(2).all(|w| w[1] < w[0]) && b2.windows(2).all(|w| w[1] < w[0]);
    Ok(Check {
        id: 5,
        name: "Chen-Stein terms",
        pass: b3_ok && decreasing && rel(b1[0], B1_AT_1E4) <= 1e-3,
        detail: format!(
            "b1 {:.4e} {:.4e} {:.4e}, b2 {:.4e} {:.4e} {:.4e}",
            b1[0], b1[1], b1[2], b2[0], b2[1], b2[2]
        ),
    })
}

fn coupling(seed: u64, workers: usize) -> softrgg::Result<Check> {
    let gaps = [100.0, 1000.0, 1e4]
        .iter()
        .map(|&l| {
            let (regime, cf) = rayleigh(l);
            coupling_gap(&regime, &cf)
        })
        .collect::<softrgg::Result<Vec<_>>>()?;
    let mut spec = ExperimentSpec::new(1.0, 100.0, Family::Rayleigh, 5_000, seed);
    spec.truncation = true;
    let r = run_trials(&spec, workers)?;
    let diff = r.coupling_difference.expect("truncation requested");
    let band = SIGMAS * diff.std_error + 1.0 / spec.trials as f64;
    let pass = rel(gaps[0], GAP_AT_100) <= 0.01
        && gaps.windows(2).all(|w| w[1] < w[0])
        && gaps[2] <= 1e-3
        && (diff.mean - gaps[0]).abs() <= band
        && r.violations == 0;
    Ok(Check {
        id: 6,
        name: "truncation coupling",
        pass,
        detail: format!(
            "gap {:.6}, MC {:.6} ± {:.6}, {} violations",
            gaps[0], diff.mean, band, r.violations
        ),
    })
}

fn discretization(seed: u64, workers: usize) -> softrgg::Result<Check> {
    let mut spec = ExperimentSpec::new(1.0, 10.0, Family::Rayleigh, 20_000, seed);
    spec.truncation = true;
    spec.m_values = vec![1, 2, 4, 8];
    let r = run_trials(&spec, workers)?;
    let mut pass = r.violations == 0;
    for d in &r.discretization {
        let p = d.p_mismatch.estimate;
        pass &= p <= collision_bound(d.m, 10) + SIGMAS * binomial_sd(p, spec.trials);
    }
    pass &= r
        .discretization
        .windows(2)
        .all(|w| w[1].tv_truncated_w <= w[0].tv_truncated_w);
    let tvs: Vec<String> = r
        .discretization
        .iter()
        .map(|d| format!("{:.4}", d.tv_truncated_w))
        .collect();
    Ok(Check {
        id: 7,
        name: "discretisation",
        pass,
        detail: format!("TV(Ñ, W) for m=1,2,4,8: {}", tvs.join(", ")),
    })
}

fn oracles(seed: u64) -> softrgg::Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let torus = Torus::new(100.0)?;
    let mut agree = 0;
    for _ in 0..500 {
        let n = rng.random_range(0..=50u32);
        let p: f64 = rng.random_range(0.0..0.15);
        let positions = (0..n).map(|_| rng.random_range(0.0..100.0)).collect();
        let mut pairs = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random::<f64>() < p {
                    pairs.push((u, v));
                }
            }
        }
        let g = GraphSample::from_edges(PointConfiguration::new(torus, positions)?, &pairs)?;
        agree += (is_connected(&g) == is_connected_bfs(&g)) as u32;
    }

    let (regime, cf) = rayleigh(1000.0);
    let big = Torus::new(1000.0)?;
    let resamples = 20_000u64;
    let mut freq_ok = true;
    for factor in [0.25, 0.75, 1.25, 1.75, 2.5] {
        let d = factor * regime.radius;
        let target = evaluate_scaled(&cf, &regime, d, false);
        let mut hits = 0u64;
        for _ in 0..resamples {
            let cfg = PointConfiguration::new(big, vec![0.0, d])?;
            hits += sample_edges(cfg, &cf, &regime, &mut rng, SamplingMode::Exact)?
                .edges()
                .len() as u64;
        }
        let f = hits as f64 / resamples as f64;
        freq_ok &= (f - target).abs() <= SIGMAS * binomial_sd(target, resamples);
    }
    Ok(Check {
        id: 8,
        name: "oracle equivalence",
        pass: agree == 500 && freq_ok,
        detail: format!(
            "union-find = BFS on {agree}/500 graphs, edge frequencies within 3σ: {freq_ok}"
        ),
    })
}

fn determinism(seed: u64) -> softrgg::Result<Check> {
    let mut spec = ExperimentSpec::new(1.0, 100.0, Family::Rayleigh, 200, seed);
    spec.truncation = true;
    spec.m_values = vec![2];
    let render = |workers: usize| -> softrgg::Result<(String, Vec<u8>)> {
        let rows = sweep(&spec, &[50.0, 100.0], workers, 2)?;
        let mut csv = Vec::new();
        write_sweep_csv(&rows, &mut csv)?;
        Ok((to_json_string(&rows), csv))
    };
    let one = render(1)?;
    let four = render(4)?;
    Ok(Check {
        id: 9,
        name: "determinism",
        pass: one == four,
        detail: format!("workers 1 vs 4 byte-identical: {}", one == four),
    })
}

fn norm_limits() -> softrgg::Result<Check> {
    let (regime, cf) = rayleigh(1e8);
    let (r1, r2) = truncated_norm_ratios(&regime, &cf)?;
    let t1 = 2.0 * cf.l1_norm();
    let t2 = 2.0 * cf.l2sq_norm();
    Ok(Check {
        id: 10,
        name: "norm limits",
        pass: rel(r1, t1) <= 1e-3 && rel(r2, t2) <= 1e-3,
        detail: format!("L=1e8: {r1:.6} vs {t1:.6}, {r2:.6} vs {t2:.6}"),
    })
}

/// Run every check; `report` sees each result as soon as it is ready.
pub fn run_checks(
    seed: u64,
    workers: usize,
    mut report: impl FnMut(&Check),
) -> softrgg::Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut push = |c: Check, checks: &mut Vec<Check>| {
        report(&c);
        checks.push(c);
    };

    let small = run_trials(
        &ExperimentSpec::new(1.0, 100.0, Family::Rayleigh, 4_000, seed),
        workers,
    )?;
    let medium = run_trials(
        &ExperimentSpec::new(1.0, 1000.0, Family::Rayleigh, 4_000, seed + 1),
        workers,
    )?;
    let large = run_trials(
        &ExperimentSpec::new(1.0, 1e4, Family::Rayleigh, 1_000, seed + 2),
        workers,
    )?;
    push(mean_law(&medium), &mut checks);
    push(no_isolated(&large), &mut checks);
    push(tv_trend(&small, &medium), &mut checks);
    push(connectivity(&[&small, &medium, &large]), &mut checks);
    push(chen_stein()?, &mut checks);
    push(coupling(seed + 3, workers)?, &mut checks);
    push(discretization(seed + 4, workers)?, &mut checks);
    push(oracles(seed + 5)?, &mut checks);
    push(determinism(seed + 6)?, &mut checks);
    push(norm_limits()?, &mut checks);
    Ok(checks)
}
