//! Connection functions `H`, their norms, the scaling regime and truncation.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_with_breaks, Integral, Tolerance};

/// Beyond this point every built-in family's value (and tail integral) is
/// below 1e-14.
const TAIL_MASS: f64 = 1e-14;

/// Tabulated functions whose last sample exceeds this are treated as having
/// a non-decaying tail.
const TABLE_TAIL_LIMIT: f64 = 1e-6;

/// `δ = ‖H‖₁ − ‖H‖₂²` at or below this counts as zero.
pub const ASSUMPTION_MARGIN_FLOOR: f64 = 1e-9;

pub const DEFAULT_ALPHA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    /// `H(x) = exp(-x²)`
    Rayleigh,
    /// `H(x) = exp(-x)`
    Exponential,
    /// `H(x) = 1` for `x ≤ r_c`, else 0.
    Hard { r_c: f64 },
    /// Piecewise-linear through the samples, clamped to `[0, 1]`.
    Tabulated { x: Vec<f64>, h: Vec<f64> },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Rayleigh => "rayleigh",
            Family::Exponential => "exponential",
            Family::Hard { .. } => "hard",
            Family::Tabulated { .. } => "tabulated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norm {
    pub value: f64,
    pub abs_error: f64,
}

impl From<Integral> for Norm {
    fn from(i: Integral) -> Self {
        Norm {
            value: i.value,
            abs_error: i.abs_error,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub pass: bool,
    /// `‖H‖₁ − ‖H‖₂²`
    pub margin: f64,
    /// Combined numeric error of the two norms.
    pub margin_error: f64,
}

/// A connection function together with its cached norms.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionFunction {
    family: Family,
    l1: Norm,
    l2sq: Norm,
}

impl ConnectionFunction {
    pub fn rayleigh() -> Self {
        let pi = std::f64::consts::PI;
        ConnectionFunction {
            family: Family::Rayleigh,
            l1: Norm {
                value: pi.sqrt() / 2.0,
                abs_error: 0.0,
            },
            l2sq: Norm {
                value: (pi / 8.0).sqrt(),
                abs_error: 0.0,
            },
        }
    }

    pub fn exponential() -> Self {
        ConnectionFunction {
            family: Family::Exponential,
            l1: Norm {
                value: 1.0,
                abs_error: 0.0,
            },
            l2sq: Norm {
                value: 0.5,
                abs_error: 0.0,
            },
        }
    }

    pub fn hard(r_c: f64) -> Result<Self> {
        if !(r_c > 0.0 && r_c.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "r_c",
                reason: format!("hard cutoff must be positive and finite, got {r_c}"),
            });
        }
        let norm = Norm {
            value: r_c,
            abs_error: 0.0,
        };
        Ok(ConnectionFunction {
            family: Family::Hard { r_c },
            l1: norm,
            l2sq: norm,
        })
    }

    /// Piecewise-linear function through `(x[k], h[k])`. Values are clamped
    /// to `[0, 1]`; below `x[0]` the first value is held, beyond the last
    /// sample the function is zero.
    pub fn tabulated(x: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        if x.len() != h.len() {
            return Err(Error::InvalidTable(format!(
                "{} abscissae but {} values",
                x.len(),
                h.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::InvalidTable("need at least two samples".into()));
        }
        if x.iter().chain(&h).any(|v| !v.is_finite()) {
            return Err(Error::InvalidTable("non-finite sample".into()));
        }
        if x[0] < 0.0 {
            return Err(Error::InvalidTable(format!("negative abscissa {}", x[0])));
        }
        if let Some(w) = x.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidTable(format!(
                "abscissae must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        let h: Vec<f64> = h.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let last = *h.last().unwrap();
        if last > TABLE_TAIL_LIMIT {
            return Err(Error::DivergentTail { last });
        }
        if last > 0.0 {
            log::warn!(
                "tabulated connection function truncated at x = {} where H = {last:e}",
                x.last().unwrap()
            );
        }

        let mut cf = ConnectionFunction {
            family: Family::Tabulated { x, h },
            l1: Norm {
                value: 0.0,
                abs_error: 0.0,
            },
            l2sq: Norm {
                value: 0.0,
                abs_error: 0.0,
            },
        };
        cf.l1 = cf.l1_norm_quadrature()?;
        cf.l2sq = cf.l2sq_norm_quadrature()?;
        if cf.l1.value <= 0.0 {
            return Err(Error::InvalidTable("function integrates to zero".into()));
        }
        Ok(cf)
    }

    pub fn from_family(family: Family) -> Result<Self> {
        match family {
            Family::Rayleigh => Ok(Self::rayleigh()),
            Family::Exponential => Ok(Self::exponential()),
            Family::Hard { r_c } => Self::hard(r_c),
            Family::Tabulated { x, h } => Self::tabulated(x, h),
        }
    }

    /// Load a two-column `x, H(x)` CSV; a non-numeric first row is taken as
    /// a header.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut xs = Vec::new();
        let mut hs = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != 2 {
                return Err(Error::InvalidTable(format!(
                    "row {}: expected 2 columns, found {}",
                    row + 1,
                    record.len()
                )));
            }
            let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
            match parsed {
                (Ok(x), Ok(h)) => {
                    xs.push(x);
                    hs.push(h);
                }
                _ if row == 0 => continue,
                _ => {
                    return Err(Error::InvalidTable(format!(
                        "row {}: non-numeric entry",
                        row + 1
                    )))
                }
            }
        }
        Self::tabulated(xs, hs)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// `H(x)` for `x ≥ 0`.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match &self.family {
            Family::Rayleigh => (-x * x).exp(),
            Family::Exponential => (-x).exp(),
            Family::Hard { r_c } => {
                if x <= *r_c {
                    1.0
                } else {
                    0.0
                }
            }
            Family::Tabulated { x: xs, h } => interpolate(xs, h, x),
        }
    }

    /// Point beyond which `H` and its tail integral are negligible (< 1e-14),
    /// or exactly zero.
    pub fn support_end(&self) -> f64 {
        match &self.family {
            Family::Rayleigh => (1.0 / TAIL_MASS).ln().sqrt(),
            Family::Exponential => (1.0 / TAIL_MASS).ln(),
            Family::Hard { r_c } => *r_c,
            Family::Tabulated { x, .. } => *x.last().unwrap(),
        }
    }

    /// Points where `H` has a jump or a kink.
    pub fn breakpoints(&self) -> &[f64] {
        match &self.family {
            Family::Hard { r_c } => std::slice::from_ref(r_c),
            Family::Tabulated { x, .. } => x,
            _ => &[],
        }
    }

    /// `∫₀^upper H(z/scale)^power dz` by adaptive quadrature.
    pub fn integral_scaled(&self, scale: f64, upper: f64, power: i32) -> Result<Integral> {
        self.integral_scaled_tol(scale, upper, power, Tolerance::default())
    }

    pub fn integral_scaled_tol(
        &self,
        scale: f64,
        upper: f64,
        power: i32,
        tol: Tolerance,
    ) -> Result<Integral> {
        let end = upper.min(scale * self.support_end());
        if end <= 0.0 {
            return Ok(Integral {
                value: 0.0,
                abs_error: 0.0,
            });
        }
        let breaks: Vec<f64> = self.breakpoints().iter().map(|b| b * scale).collect();
        integrate_with_breaks(|z| self.eval(z / scale).powi(power), 0.0, end, &breaks, tol)
    }

    /// `∫₀^upper H(x)^power dx`.
    pub fn integral(&self, upper: f64, power: i32) -> Result<Integral> {
        self.integral_scaled(1.0, upper, power)
    }

    /// `‖H‖₁`: analytic for the built-in families.
    pub fn l1_norm(&self) -> f64 {
        self.l1.value
    }

    /// `‖H‖₂²`: analytic for the built-in families.
    pub fn l2sq_norm(&self) -> f64 {
        self.l2sq.value
    }

    pub fn l1_norm_quadrature(&self) -> Result<Norm> {
        self.integral(self.support_end(), 1).map(Norm::from)
    }

    pub fn l2sq_norm_quadrature(&self) -> Result<Norm> {
        self.integral(self.support_end(), 2).map(Norm::from)
    }

    /// `‖H‖₁ < ∞` and `‖H‖₂² < ‖H‖₁` strictly.
    pub fn check_assumptions(&self) -> AssumptionReport {
        let margin = self.l1.value - self.l2sq.value;
        let margin_error = self.l1.abs_error + self.l2sq.abs_error;
        AssumptionReport {
            pass: self.l1.value.is_finite() && margin > ASSUMPTION_MARGIN_FLOOR.max(margin_error),
            margin,
            margin_error,
        }
    }

    /// Whether `H` is nonincreasing on `[0, ∞)`.
    pub fn is_nonincreasing(&self) -> bool {
        match &self.family {
            Family::Tabulated { h, .. } => h.windows(2).all(|w| w[1] <= w[0]),
            _ => true,
        }
    }

    /// Smallest radius `W` with `sup_{ρ > W} H(ρ / R) < epsilon`.
    pub fn window_radius(&self, radius: f64, epsilon: f64) -> f64 {
        let x = match &self.family {
            Family::Rayleigh => (1.0 / epsilon).ln().max(0.0).sqrt(),
            Family::Exponential => (1.0 / epsilon).ln().max(0.0),
            Family::Hard { r_c } => *r_c,
            Family::Tabulated { x, h } => {
                // last knot whose adjoining segment still reaches epsilon
                let mut w = 0.0;
                if h[0] >= epsilon {
                    w = x[0];
                }
                for k in 0..x.len() - 1 {
                    if h[k].max(h[k + 1]) >= epsilon {
                        w = x[k + 1];
                    }
                }
                w
            }
        };
        radius * x
    }
}

fn interpolate(xs: &[f64], hs: &[f64], x: f64) -> f64 {
    let last = xs.len() - 1;
    if x <= xs[0] {
        return hs[0];
    }
    if x > xs[last] {
        return 0.0;
    }
    let k = xs.partition_point(|&v| v < x).clamp(1, last);
    let (x0, x1) = (xs[k - 1], xs[k]);
    let t = (x - x0) / (x1 - x0);
    (hs[k - 1] + t * (hs[k] - hs[k - 1])).clamp(0.0, 1.0)
}

/// `τ`, `L`, `α` with the derived scaling radius `R_L = ln(τL) / (2‖H‖₁)`
/// and truncation cutoff `R_L^(1 + 1/α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRegime {
    pub tau: f64,
    pub length: f64,
    pub alpha: f64,
    pub radius: f64,
    pub cutoff: f64,
}

impl ScalingRegime {
    pub fn new(tau: f64, length: f64, cf: &ConnectionFunction, alpha: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "tau",
                reason: format!("must be positive and finite, got {tau}"),
            });
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidLength(length));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("must be positive and finite, got {alpha}"),
            });
        }
        if tau * length <= 1.0 {
            return Err(Error::InvalidRegime { tau, length });
        }
        let radius = (tau * length).ln() / (2.0 * cf.l1_norm());
        Ok(ScalingRegime {
            tau,
            length,
            alpha,
            radius,
            cutoff: radius.powf(1.0 + 1.0 / alpha),
        })
    }

    /// `R_L^(1/α)`: the truncation point in unscaled units.
    pub fn scaled_cutoff(&self) -> f64 {
        self.radius.powf(1.0 / self.alpha)
    }
}

pub fn scaling_radius(
    tau: f64,
    length: f64,
    cf: &ConnectionFunction,
    alpha: f64,
) -> Result<ScalingRegime> {
    ScalingRegime::new(tau, length, cf, alpha)
}

/// `H(rho / R_L)`, zeroed beyond the cutoff when `truncated`.
#[inline]
pub fn evaluate_scaled(
    cf: &ConnectionFunction,
    regime: &ScalingRegime,
    rho: f64,
    truncated: bool,
) -> f64 {
    if truncated && rho > regime.cutoff {
        0.0
    } else {
        cf.eval(rho / regime.radius)
    }
}
