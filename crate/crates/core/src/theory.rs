//! Closed-form expectations, Poisson references, total variation distances
//! and the Chen–Stein bound terms, all evaluated numerically.
//!
//! Throughout, `κ = ∫₀^L h̃^L(0, z) dz` is the mean number of would-be
//! neighbours of a node under the truncated connection function and
//! `p = e^{-κ}` the limiting per-segment isolation probability (scaled by
//! the segment count). Products of exponentials are formed in log space so
//! that `L` up to 1e8 stays well inside `f64` range.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::connection::{ConnectionFunction, ScalingRegime};
use crate::error::{Error, Result};
use crate::geometry::Torus;
use crate::quadrature::{integrate_with_breaks, Tolerance};

/// Poisson tails beyond this mass are cut and charged as worst-case error.
pub const POISSON_TAIL_MASS: f64 = 1e-12;

/// Relative tolerance of the outer integral in [`b2_upper`].
pub const B2_OUTER_REL_TOL: f64 = 1e-8;

/// Empirical law of a count: how many trials observed each value.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountDistribution {
    counts: BTreeMap<u64, u64>,
    total: u64,
}

impl CountDistribution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_samples<I: IntoIterator<Item = u64>>(samples: I) -> Self {
        let mut d = Self::new();
        for k in samples {
            d.record(k);
        }
        d
    }

    pub fn record(&mut self, k: u64) {
        *self.counts.entry(k).or_insert(0) += 1;
        self.total += 1;
    }

    /// Order-insensitive merge.
    pub fn merge(&mut self, other: &CountDistribution) {
        for (&k, &c) in &other.counts {
            *self.counts.entry(k).or_insert(0) += c;
        }
        self.total += other.total;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn count(&self, k: u64) -> u64 {
        self.counts.get(&k).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<u64, u64> {
        &self.counts
    }

    pub fn pmf(&self, k: u64) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(k) as f64 / self.total as f64
        }
    }

    pub fn max_value(&self) -> Option<u64> {
        self.counts.keys().next_back().copied()
    }

    pub fn mean(&self) -> f64 {
        let s: f64 = self.counts.iter().map(|(&k, &c)| k as f64 * c as f64).sum();
        s / self.total as f64
    }
}

/// `e^{-λ} λ^k / k!`, evaluated in log space.
pub fn poisson_pmf(lambda: f64, k: u64) -> f64 {
    if k == 0 {
        return (-lambda).exp();
    }
    let k = k as f64;
    (-lambda + k * lambda.ln() - ln_gamma(k + 1.0)).exp()
}

/// Upper bound on `P(Po(λ) > k)`, valid for `k + 2 > λ`: the terms beyond
/// `k + 1` shrink at least geometrically with ratio `λ / (k + 2)`.
fn poisson_tail_bound(lambda: f64, k: u64) -> f64 {
    let ratio = lambda / (k as f64 + 2.0);
    debug_assert!(ratio < 1.0);
    poisson_pmf(lambda, k + 1) / (1.0 - ratio)
}

/// Smallest `K ≥ λ` whose tail mass beyond `K` is below `POISSON_TAIL_MASS`.
pub fn poisson_tail_cutoff(lambda: f64) -> u64 {
    let mut k = lambda.ceil() as u64;
    while poisson_tail_bound(lambda, k) >= POISSON_TAIL_MASS {
        k += 1;
    }
    k
}

/// Argument of [`tv_distance`].
#[derive(Debug, Clone, Copy)]
pub enum Law<'a> {
    Empirical(&'a CountDistribution),
    Poisson(f64),
}

impl Law<'_> {
    fn validate(&self) -> Result<()> {
        match self {
            Law::Empirical(d) if d.is_empty() => Err(Error::EmptyDistribution),
            Law::Poisson(l) if !(*l > 0.0 && l.is_finite()) => Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("Poisson mean must be positive and finite, got {l}"),
            }),
            _ => Ok(()),
        }
    }

    fn pmf(&self, k: u64) -> f64 {
        match self {
            Law::Empirical(d) => d.pmf(k),
            Law::Poisson(l) => poisson_pmf(*l, k),
        }
    }

    fn support_cut(&self) -> u64 {
        match self {
            Law::Empirical(d) => d.max_value().unwrap_or(0),
            Law::Poisson(l) => poisson_tail_cutoff(*l),
        }
    }

    fn tail_beyond(&self, k: u64) -> f64 {
        match self {
            Law::Empirical(_) => 0.0,
            Law::Poisson(l) => poisson_tail_bound(*l, k),
        }
    }
}

/// `½ Σ_k |p_a(k) − p_b(k)|`. Poisson tails past the cut are added in full,
/// so the result overestimates by at most ~1e-12.
pub fn tv_distance(a: Law<'_>, b: Law<'_>) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    let cut = a.support_cut().max(b.support_cut());
    let body: f64 = (0..=cut).map(|k| (a.pmf(k) - b.pmf(k)).abs()).sum();
    let tails = a.tail_beyond(cut) + b.tail_beyond(cut);
    Ok((0.5 * (body + tails)).clamp(0.0, 1.0))
}

/// `∫₀^L h^L(0, z)^power dz`, with `h̃` in place of `h` when `truncated`.
pub fn exposure(
    regime: &ScalingRegime,
    cf: &ConnectionFunction,
    power: i32,
    truncated: bool,
) -> Result<f64> {
    let half = regime.length / 2.0;
    let upper = if truncated {
        regime.cutoff.min(half)
    } else {
        half
    };
    Ok(2.0 * cf.integral_scaled(regime.radius, upper, power)?.value)
}

/// Exposure split at the truncation cutoff: `(κ, extra)` where `κ` is the
/// truncated exposure and `extra ≥ 0` the part beyond the cutoff.
fn split_exposure(regime: &ScalingRegime, cf: &ConnectionFunction) -> Result<(f64, f64)> {
    let half = regime.length / 2.0;
    let kappa = exposure(regime, cf, 1, true)?;
    if regime.cutoff >= half {
        return Ok((kappa, 0.0));
    }
    let r = regime.radius;
    let tail_end = half.min(r * cf.support_end());
    if tail_end <= regime.cutoff {
        return Ok((kappa, 0.0));
    }
    let breaks: Vec<f64> = cf.breakpoints().iter().map(|b| b * r).collect();
    let extra = integrate_with_breaks(
        |z| cf.eval(z / r),
        regime.cutoff,
        tail_end,
        &breaks,
        Tolerance::default(),
    )?
    .value;
    Ok((kappa, 2.0 * extra.max(0.0)))
}

/// `E[N_iso] = L exp(-∫₀^L h^L(0, z) dz)`; with `truncated`, `E[Ñ_iso]`.
pub fn expected_isolated(
    regime: &ScalingRegime,
    cf: &ConnectionFunction,
    truncated: bool,
) -> Result<f64> {
    let (kappa, extra) = split_exposure(regime, cf)?;
    let exponent = if truncated { kappa } else { kappa + extra };
    Ok((regime.length.ln() - exponent).exp())
}

/// `E[Ñ_iso] − E[N_iso]`, which bounds `d_TV(N_iso, Ñ_iso)` through the
/// edge-removal coupling. Formed as `E[Ñ_iso]·(1 − e^{-extra})` so it is
/// never negative.
pub fn coupling_gap(regime: &ScalingRegime, cf: &ConnectionFunction) -> Result<f64> {
    let (kappa, extra) = split_exposure(regime, cf)?;
    Ok((regime.length.ln() - kappa).exp() * -(-extra).exp_m1())
}

/// `((1/R_L)∫₀^L h̃^L(0,z) dz, (1/R_L)∫₀^L h̃^L(0,z)² dz)`, which tend to
/// `2‖H‖₁` and `2‖H‖₂²`.
pub fn truncated_norm_ratios(
    regime: &ScalingRegime,
    cf: &ConnectionFunction,
) -> Result<(f64, f64)> {
    Ok((
        exposure(regime, cf, 1, true)? / regime.radius,
        exposure(regime, cf, 2, true)? / regime.radius,
    ))
}

/// `∫₀^L φ(z, {0, y}) dz` with `φ = 1 − (1 − h̃(z,0))(1 − h̃(z,y))`: the mean
/// number of nodes adjacent to at least one of two nodes at `0` and `y`.
pub fn phi_integral(y: f64, regime: &ScalingRegime, cf: &ConnectionFunction) -> Result<f64> {
    let length = regime.length;
    let half = length / 2.0;
    if !(0.0..=half).contains(&y) {
        return Err(Error::InvalidParameter {
            name: "y",
            reason: format!("must lie in [0, L/2] = [0, {half}], got {y}"),
        });
    }
    let torus = Torus::new(length)?;
    let c = regime.cutoff;
    let r = regime.radius;
    let h = |d: f64| if d <= c { cf.eval(d / r) } else { 0.0 };
    // z ranges over [-L/2, L/2); distances to 0 and to y are circular
    let d0 = |z: f64| z.abs();
    let dy = |z: f64| torus.distance_unchecked(torus.wrap(z), y);
    let phi = |z: f64| {
        let a = h(d0(z));
        let b = h(dy(z));
        a + b - a * b
    };

    let recentre = |t: f64| (t + half).rem_euclid(length) - half;
    let mut offsets = vec![0.0, c];
    offsets.extend(cf.breakpoints().iter().map(|b| b * r).filter(|&d| d < c));
    let mut breaks = vec![-half, half, recentre(y + half)];
    for &o in &offsets {
        for centre in [0.0, y] {
            breaks.push(recentre(centre + o));
            breaks.push(recentre(centre - o));
        }
    }
    breaks.retain(|b| b.is_finite());
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0].max(-half), w[1].min(half));
        if hi <= lo {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        if d0(mid) > c && dy(mid) > c {
            continue;
        }
        total += integrate_with_breaks(phi, lo, hi, &[], Tolerance::default())?.value;
    }
    Ok(total)
}

/// `lim_{m→∞} b1` and the isolation quantities it is built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct B1Limit {
    /// `6 L R_L^{1+1/α} p²` with `p = e^{-κ}`.
    pub b1: f64,
    /// The same product with a single factor `p`, kept for comparison.
    pub b1_single_factor: f64,
    pub kappa: f64,
    pub p_limit: f64,
}

pub fn b1_limit(regime: &ScalingRegime, cf: &ConnectionFunction) -> Result<B1Limit> {
    let kappa = exposure(regime, cf, 1, true)?;
    let log_prefactor = 6f64.ln() + regime.length.ln() + regime.cutoff.ln();
    Ok(B1Limit {
        b1: (log_prefactor - 2.0 * kappa).exp(),
        b1_single_factor: (log_prefactor - kappa).exp(),
        kappa,
        p_limit: (-kappa).exp(),
    })
}

/// `2L ∫₀^{3R_L^{1+1/α}} exp(−∫₀^L φ(z, {0, y}) dz) dy`, the bound on
/// `limsup_m b2`. The outer range is capped at `L/2`.
pub fn b2_upper(regime: &ScalingRegime, cf: &ConnectionFunction) -> Result<f64> {
    let half = regime.length / 2.0;
    let c = regime.cutoff;
    let upper = (3.0 * c).min(half);
    let log_2l = (2.0 * regime.length).ln();
    // Quadrature failures inside the closure surface as NaN and are
    // reported after the outer pass.
    let integrand = |y: f64| match phi_integral(y, regime, cf) {
        Ok(phi) => (log_2l - phi).exp(),
        Err(_) => f64::NAN,
    };
    let breaks = [c, 2.0 * c, regime.length - 2.0 * c];
    let tol = Tolerance {
        abs: 1e-300,
        rel: B2_OUTER_REL_TOL,
    };
    let value = integrate_with_breaks(integrand, 0.0, upper, &breaks, tol)?.value;
    if value.is_nan() {
        // rerun a point evaluation to recover the underlying error
        phi_integral(0.0, regime, cf)?;
        return Err(Error::QuadratureFailed {
            a: 0.0,
            b: upper,
            error: f64::NAN,
        });
    }
    Ok(value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct B3Value {
    pub value: u8,
    pub valid: bool,
}

/// `b3 = 0`, guaranteed once `2/m ≤ R_L^{1+1/α}`: then every index outside
/// the neighbourhood is beyond the `2R_L^{1+1/α}` independence radius.
pub fn b3_value(regime: &ScalingRegime, m: u64) -> B3Value {
    B3Value {
        value: 0,
        valid: m >= 1 && 2.0 / m as f64 <= regime.cutoff,
    }
}

/// `min(1, 1/E[W]) (b1 + b2 + b3)`, clamped to `[0, 1]`.
pub fn chen_stein_upper(b1: f64, b2_upper: f64, b3: f64, expected_w: f64) -> f64 {
    let factor = if expected_w > 1.0 {
        1.0 / expected_w
    } else {
        1.0
    };
    (factor * (b1 + b2_upper + b3)).clamp(0.0, 1.0)
}

/// Every Chen–Stein term for one regime, in the `m → ∞` limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChenSteinReport {
    pub tau: f64,
    #[serde(rename = "L")]
    pub length: f64,
    pub alpha: f64,
    pub family: String,
    /// Segments per unit length at which `b3_valid` was checked.
    pub m: u64,
    pub b1: f64,
    pub b1_single_factor: f64,
    pub b2_upper: f64,
    pub b3: f64,
    pub b3_valid: bool,
    #[serde(rename = "expected_W")]
    pub expected_w: f64,
    pub kappa_limit: f64,
    pub p_limit: f64,
    pub tv_upper: f64,
}

impl ChenSteinReport {
    pub fn evaluate(regime: &ScalingRegime, cf: &ConnectionFunction, m: u64) -> Result<Self> {
        let b1 = b1_limit(regime, cf)?;
        let b2 = b2_upper(regime, cf)?;
        let b3 = b3_value(regime, m);
        let expected_w = (regime.length.ln() - b1.kappa).exp();
        Ok(ChenSteinReport {
            tau: regime.tau,
            length: regime.length,
            alpha: regime.alpha,
            family: cf.family().name().to_string(),
            m,
            b1: b1.b1,
            b1_single_factor: b1.b1_single_factor,
            b2_upper: b2,
            b3: b3.value as f64,
            b3_valid: b3.valid,
            expected_w,
            kappa_limit: b1.kappa,
            p_limit: b1.p_limit,
            tv_upper: chen_stein_upper(b1.b1, b2, b3.value as f64, expected_w),
        })
    }
}
