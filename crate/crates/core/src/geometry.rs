//! Torus arithmetic and unit-intensity Poisson point process sampling.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The interval `[0, length)` with its endpoints identified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Torus {
    length: f64,
}

impl Torus {
    pub fn new(length: f64) -> Result<Self> {
        if length > 0.0 && length.is_finite() {
            Ok(Torus { length })
        } else {
            Err(Error::InvalidLength(length))
        }
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Reduce any real into `[0, length)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let r = x.rem_euclid(self.length);
        // rem_euclid can round up to exactly `length` for tiny negative x.
        if r >= self.length {
            0.0
        } else {
            r
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        (0.0..self.length).contains(&x)
    }

    /// Circular distance without range checks; callers guarantee membership.
    #[inline]
    pub fn distance_unchecked(&self, x: f64, y: f64) -> f64 {
        let d = (x - y).abs();
        d.min(self.length - d)
    }

    pub fn distance(&self, x: f64, y: f64) -> Result<f64> {
        for p in [x, y] {
            if !self.contains(p) {
                return Err(Error::OutOfTorus {
                    x: p,
                    length: self.length,
                });
            }
        }
        Ok(self.distance_unchecked(x, y))
    }
}

/// `min(|x - y|, L - |x - y|)` for points of `[0, L)`.
pub fn toroidal_distance(x: f64, y: f64, torus: &Torus) -> Result<f64> {
    torus.distance(x, y)
}

/// A realisation of the point process: sorted positions in `[0, L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointConfiguration {
    torus: Torus,
    positions: Vec<f64>,
}

impl PointConfiguration {
    /// Build from arbitrary positions; they are validated and sorted.
    pub fn new(torus: Torus, mut positions: Vec<f64>) -> Result<Self> {
        if let Some(&x) = positions.iter().find(|&&x| !torus.contains(x)) {
            return Err(Error::OutOfTorus {
                x,
                length: torus.length(),
            });
        }
        positions.sort_by(f64::total_cmp);
        Ok(PointConfiguration { torus, positions })
    }

    pub fn torus(&self) -> &Torus {
        &self.torus
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Sample a unit-intensity PPP on the torus: a Poisson(L) count, then i.i.d.
/// uniform positions, sorted.
pub fn sample_ppp<R: Rng + ?Sized>(torus: &Torus, rng: &mut R) -> PointConfiguration {
    let length = torus.length();
    let count = Poisson::new(length)
        .map(|d| d.sample(rng) as usize)
        .expect("torus length is positive and finite");
    let mut positions: Vec<f64> = (0..count)
        .map(|_| torus.wrap(rng.random::<f64>() * length))
        .collect();
    positions.sort_by(f64::total_cmp);
    PointConfiguration {
        torus: *torus,
        positions,
    }
}
