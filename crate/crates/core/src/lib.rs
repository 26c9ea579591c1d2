//! Isolated nodes in one-dimensional soft random geometric graphs on a
//! torus.
//!
//! Nodes form a unit-intensity Poisson process on `[0, L)` with periodic
//! boundary; two nodes at circular distance `ρ` are joined independently
//! with probability `H(ρ / R_L)`, where `R_L = ln(τL) / (2‖H‖₁)`. In this
//! regime the number of isolated nodes is asymptotically `Po(1/τ)`. The
//! crate samples the model, tracks the truncation and discretisation
//! couplings used to reach that limit, and evaluates the Chen–Stein bound
//! terms numerically.

pub mod connection;
pub mod discretize;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod montecarlo;
pub mod output;
pub mod quadrature;
pub mod theory;

pub use connection::{
    evaluate_scaled, scaling_radius, AssumptionReport, ConnectionFunction, Family, ScalingRegime,
};
pub use discretize::{build_grid, collision_bound, DiscretizationGrid};
pub use error::{Error, Result};
pub use geometry::{sample_ppp, toroidal_distance, PointConfiguration, Torus};
pub use graph::{
    is_connected, isolated_count, sample_edges, truncate_edges, GraphSample, SamplingMode,
    TrialSummary,
};
pub use montecarlo::{run_trials, sweep, ExperimentResult, ExperimentSpec, SweepRow};
pub use theory::{
    b1_limit, b2_upper, b3_value, chen_stein_upper, coupling_gap, expected_isolated, phi_integral,
    poisson_pmf, tv_distance, ChenSteinReport, CountDistribution, Law,
};
