//! Segment discretisation of the torus: with `m` segments per unit length,
//! `J_i` marks segments holding exactly one node, `I_i` those whose single
//! node is also isolated, and `W = Σ I_i`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphSample;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscretizationGrid {
    pub m: u64,
    pub length: u64,
    pub segment_count: u64,
    pub exactly_one: Vec<bool>,
    pub isolated_single: Vec<bool>,
    pub w: u64,
    pub collision: bool,
    /// `⌈3 m R_L^{1+1/α}⌉`: half-width of each index neighbourhood, in segments.
    pub neighborhood_radius: u64,
}

fn integer_length(length: f64) -> Result<u64> {
    if length.fract() != 0.0 || length < 1.0 || length > u32::MAX as f64 {
        return Err(Error::InvalidParameter {
            name: "L",
            reason: format!("discretisation needs a positive integer torus length, got {length}"),
        });
    }
    Ok(length as u64)
}

/// Segment `i` is `[i/m, (i+1)/m)`.
pub fn build_grid(g: &GraphSample, m: u64, cutoff: f64) -> Result<DiscretizationGrid> {
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "m",
            reason: "must be at least 1".into(),
        });
    }
    let length = integer_length(g.config().torus().length())?;
    let segment_count = m * length;
    let mut occupancy = vec![0u32; segment_count as usize];
    let mut occupant = vec![0usize; segment_count as usize];
    for (v, &x) in g.config().positions().iter().enumerate() {
        let i = ((x * m as f64).floor() as u64).min(segment_count - 1) as usize;
        occupancy[i] += 1;
        occupant[i] = v;
    }
    let degrees = g.degrees();
    let exactly_one: Vec<bool> = occupancy.iter().map(|&c| c == 1).collect();
    let isolated_single: Vec<bool> = exactly_one
        .iter()
        .zip(&occupant)
        .map(|(&one, &v)| one && degrees[v] == 0)
        .collect();
    Ok(DiscretizationGrid {
        m,
        length,
        segment_count,
        w: isolated_single.iter().filter(|&&b| b).count() as u64,
        collision: occupancy.iter().any(|&c| c >= 2),
        exactly_one,
        isolated_single,
        neighborhood_radius: (3.0 * m as f64 * cutoff).ceil() as u64,
    })
}

/// Union bound `mL (1 − e^{-1/m} − e^{-1/m}/m)` on the probability that some
/// segment holds two or more nodes.
pub fn collision_bound(m: u64, length: u64) -> f64 {
    let s = 1.0 / m as f64;
    // 1 - e^{-s}(1 + s), written to avoid cancellation for large m
    let per_segment = -(-s).exp_m1() - s * (-s).exp();
    (m * length) as f64 * per_segment
}
