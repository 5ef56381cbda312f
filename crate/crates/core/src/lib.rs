//! Mean-field linear-quadratic team problems: static team-optimal policies,
//! their large-population limits, Monte Carlo convergence diagnostics and the
//! classical Riccati solution for dynamic LQG control.

// Checks such as `!(x > 0.0)` are written that way so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod cost;
pub mod diagnostics;
pub mod error;
pub mod linalg;
mod matrix_serde;
pub mod mc;
pub mod model;
pub mod report;
pub mod riccati;
pub mod rng;
pub mod solver;
pub mod suites;

pub use error::{Error, Result};
pub use model::{
    ConditionalMean, Coupling, DynamicLQGSpec, LinearPolicy, NoiseLaw, ObservationKind, ObservationModel, Policy,
    QuadraticCost, TeamSpec,
};
