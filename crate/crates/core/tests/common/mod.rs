//! Random valid instances shared by the integration tests.
#![allow(dead_code)]

use mfteam::model::{LinearPolicy, Policy, TeamSpec};
use nalgebra::DMatrix;
use rand::Rng;

/// `AAᵀ + floor·I` with entries of `A` uniform in [−1, 1].
pub fn random_pd<R: Rng>(rng: &mut R, n: usize, floor: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * floor
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

/// Gaussian state-coupled team of dimension `n`.
pub fn random_state_coupled<R: Rng>(rng: &mut R, n: usize) -> TeamSpec {
    let mut spec = TeamSpec::scalar_state_coupled(1.0, 1.0, 1.0, 1.0);
    spec.action_dim = n;
    spec.obs_dim = n;
    spec.state_dim = n;
    spec.cost.r = random_pd(rng, n, 0.2);
    spec.cost.q = random_pd(rng, n, 0.0);
    spec.obs_model.h = DMatrix::identity(n, n);
    spec.obs_model.state_law = mfteam::NoiseLaw::gaussian(random_pd(rng, n, 0.2));
    spec.obs_model.noise_law = mfteam::NoiseLaw::gaussian(random_pd(rng, n, 0.2));
    spec
}

/// Gaussian control-coupled team of dimension `n` with `R − 2D` positive definite.
pub fn random_control_coupled<R: Rng>(rng: &mut R, n: usize) -> TeamSpec {
    let d = random_pd(rng, n, 0.0) * 0.5;
    let r = &d * 2.0 + random_pd(rng, n, 0.3);
    let q = random_pd(rng, n, 0.0);
    let h = random_matrix(rng, n, n, 1.0) + DMatrix::identity(n, n);
    TeamSpec::control_coupled(r, d, q, h, random_pd(rng, n, 0.2), random_pd(rng, n, 0.2))
}

pub fn random_spec<R: Rng>(rng: &mut R) -> TeamSpec {
    let n = rng.random_range(1..=3);
    if rng.random_bool(0.5) {
        random_state_coupled(rng, n)
    } else {
        random_control_coupled(rng, n)
    }
}

pub fn random_profile<R: Rng>(rng: &mut R, spec: &TeamSpec, n: usize) -> Vec<Policy> {
    (0..n).map(|_| LinearPolicy::new(random_matrix(rng, spec.action_dim, spec.obs_dim, 1.0)).into()).collect()
}

pub fn scalar_gain(p: &Policy) -> f64 {
    p.linear_gain().expect("linear policy")[(0, 0)]
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn assert_valid(spec: &TeamSpec) {
    spec.ensure_valid().expect("generated spec is valid");
}
