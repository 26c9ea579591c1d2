//! Reference values and a small quadrature used only by the tests. The
//! integrator here is adaptive Simpson, deliberately unrelated to the
//! library's Gauss–Kronrod code.

#![allow(dead_code)]

pub const SQRT_PI: f64 = 1.772_453_850_905_516;

/// ‖H‖₁ and ‖H‖₂² for `H(x) = e^{-x²}`.
pub const RAYLEIGH_L1: f64 = SQRT_PI / 2.0;
pub const RAYLEIGH_L2SQ: f64 = 0.626_657_068_657_750_1;

// Frozen values from an independent 30-digit evaluation (τ = 1, α = 1,
// Rayleigh).
pub const RADIUS_100: f64 = 2.598_189_049_399_16;
pub const CUTOFF_100: f64 = 6.750_586_336_417_73;
pub const EXPECTED_TRUNCATED_100: f64 = 1.001_098_541_918_55;
pub const GAP_100: f64 = 0.001_098_541_918_553_38;
pub const B1_100: f64 = 0.405_925_565_227_074;
pub const B1_1000: f64 = 0.091_132_960_313_881_2;
pub const B1_1E4: f64 = 0.016_201_407_207_462_3;
pub const KAPPA_1E4: f64 = 9.210_340_371_974_34;
pub const CUTOFF_1E4: f64 = 27.002_345_345_670_9;
pub const B1_1E6: f64 = 3.645_316_621_665_58e-4;
pub const B1_1E8: f64 = 6.480_562_882_961_03e-6;
pub const CUTOFF_1E8: f64 = 108.009_381_382_684;
pub const B2_1E4: f64 = 0.384_428_045_620_365;
pub const B2_1E6: f64 = 0.114_634_854_506_817;
pub const B2_1E8: f64 = 0.033_827_399_082_364_5;

pub fn rayleigh(x: f64) -> f64 {
    (-x * x).exp()
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
}

/// Adaptive Simpson on `[a, b]`, split into `pieces` equal panels first.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, pieces: usize, eps: f64) -> f64 {
    let step = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let lo = a + step * i as f64;
            let hi = if i + 1 == pieces { b } else { lo + step };
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            simpson_step(&f, lo, hi, fa, fm, fb, whole, eps / pieces as f64, 40)
        })
        .sum()
}

pub struct Regime {
    pub length: f64,
    pub radius: f64,
    pub cutoff: f64,
}

/// Rayleigh regime with `α = 1`.
pub fn regime(tau: f64, length: f64) -> Regime {
    let radius = (tau * length).ln() / (2.0 * RAYLEIGH_L1);
    Regime {
        length,
        radius,
        cutoff: radius * radius,
    }
}

/// `2∫₀^u H(z/R)^p dz`.
pub fn exposure(r: &Regime, upper: f64, power: i32) -> f64 {
    let h = |z: f64| rayleigh(z / r.radius).powi(power);
    // the integrand is negligible past 12 R, so the grid only covers that
    let end = upper.min(12.0 * r.radius);
    2.0 * simpson(h, 0.0, end, 64, 1e-14)
}

pub fn expected_isolated(r: &Regime, truncated: bool) -> f64 {
    let upper = if truncated {
        r.cutoff.min(r.length / 2.0)
    } else {
        r.length / 2.0
    };
    r.length * (-exposure(r, upper, 1)).exp()
}

pub fn b1(r: &Regime) -> f64 {
    let kappa = exposure(r, r.cutoff.min(r.length / 2.0), 1);
    6.0 * r.length * r.cutoff * (-2.0 * kappa).exp()
}

pub fn poisson_pmf(lambda: f64, k: u64) -> f64 {
    let mut p = (-lambda).exp();
    for i in 1..=k {
        p *= lambda / i as f64;
    }
    p
}

/// Standard error of a binomial proportion estimated from `n` draws.
pub fn binomial_sd(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}
