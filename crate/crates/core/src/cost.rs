//! Exact expected team cost under linear policies.
//!
//! With `u^i = π_i v^i` every term of the quadratic cost is a trace against a
//! second-moment matrix, so `J_N` only depends on the covariances of the
//! primitive laws. This holds for the two-point laws as well as Gaussians.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{check_profile, policy_for, Coupling, Policy, TeamSpec};

/// Distinct gains with their multiplicities. A symmetric profile is one gain
/// of multiplicity N, so evaluation cost does not grow with N.
fn gains(spec: &TeamSpec, n: usize, policies: &[Policy]) -> Result<Vec<(DMatrix<f64>, f64)>> {
    check_profile(policies, n, spec)?;
    let linear = |p: &Policy| {
        p.linear_gain().ok_or_else(|| {
            Error::Capability("exact evaluation needs policies that are linear in the observation".into())
        })
    };
    if policies.len() == 1 {
        return Ok(vec![(linear(&policies[0])?, n as f64)]);
    }
    (0..n).map(|i| Ok((linear(policy_for(policies, i))?, 1.0))).collect()
}

/// Exact `J_N` for a symmetric (one policy) or per-DM profile.
pub fn exact_cost(spec: &TeamSpec, n: usize, policies: &[Policy]) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    let g = gains(spec, n, policies)?;
    match spec.coupling {
        Coupling::StateCoupled => Ok(state_coupled(spec, &g)),
        Coupling::ControlCoupled => {
            let hs = vec![spec.obs_model.h.clone(); g.len()];
            control_coupled(spec, &hs, &g)
        }
    }
}

/// Exact `J_N` for a control-coupled team whose DMs observe `v^i = H_i x + z^i`.
pub fn exact_cost_with_observers(spec: &TeamSpec, hs: &[DMatrix<f64>], policies: &[Policy]) -> Result<f64> {
    if spec.coupling != Coupling::ControlCoupled {
        return Err(Error::InvalidArgument("per-DM observation matrices apply to control-coupled teams".into()));
    }
    if hs.is_empty() {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    for h in hs {
        if h.shape() != spec.obs_model.h.shape() {
            return Err(Error::Shape("observation matrix shape".into()));
        }
    }
    let mut g = gains(spec, hs.len(), policies)?;
    if g.len() != hs.len() {
        // Observers differ, so a shared gain still needs one entry per DM.
        let (pi, _) = g.remove(0);
        g = vec![(pi, 1.0); hs.len()];
    }
    control_coupled(spec, hs, &g)
}

fn state_coupled(spec: &TeamSpec, gains: &[(DMatrix<f64>, f64)]) -> f64 {
    let n: f64 = gains.iter().map(|g| g.1).sum();
    let r = &spec.cost.r;
    let q = &spec.cost.q;
    let sxx = spec.obs_model.state_law.covariance();
    let svv = spec.obs_covariance();
    let sxv = spec.state_obs_covariance();
    let own = 1.0 + 1.0 / n;
    // Covariance of the other DMs' contribution to μ, shared by every DM.
    let others = &sxx * ((n - 1.0) / (n * n));
    let total: f64 = gains
        .iter()
        .map(|(pi, w)| {
            let uu = pi * &svv * pi.transpose();
            let ux = pi * sxv.transpose();
            let err = &uu - (&ux + ux.transpose()) * own + &sxx * (own * own) + &others;
            w * ((r * &uu).trace() + (q * err).trace())
        })
        .sum();
    total / n
}

fn control_coupled(spec: &TeamSpec, hs: &[DMatrix<f64>], gains: &[(DMatrix<f64>, f64)]) -> Result<f64> {
    let n: f64 = gains.iter().map(|g| g.1).sum();
    let r = &spec.cost.r;
    let q = &spec.cost.q;
    let d = spec.d_or_zero();
    let s0 = spec.obs_model.state_law.covariance();
    let sz = spec.obs_model.noise_law.covariance();

    let mut own_r = 0.0;
    let mut a_bar = DMatrix::zeros(spec.action_dim, spec.state_dim);
    let mut noise_bar = DMatrix::zeros(spec.action_dim, spec.action_dim);
    for ((pi, w), h) in gains.iter().zip(hs) {
        let a = pi * h;
        let pzp = pi * &sz * pi.transpose();
        own_r += w * (r * (&a * &s0 * a.transpose() + &pzp)).trace();
        a_bar += a * *w;
        noise_bar += pzp * *w;
    }
    a_bar /= n;
    noise_bar /= n * n;
    // E[ū ūᵀ], E[ū xᵀ]
    let uu = &a_bar * &s0 * a_bar.transpose() + &noise_bar;
    let ux = &a_bar * &s0;
    let cross = (&d * ux.transpose()).trace() + (&d * &uu).trace();
    let mean_field = &s0 + ux.transpose() + &ux + &uu;
    Ok((own_r - 2.0 * n * cross + (q * mean_field).trace()) / n)
}

/// Exact contribution of the extra term `(1/N) Σ_{k≤M} u_kᵀ α_k u_k` to
/// `J_N` under a symmetric linear policy (the first `M = alphas.len()` DMs carry
/// the extra weights).
pub fn asymmetric_term(spec: &TeamSpec, n: usize, policy: &Policy, alphas: &[DMatrix<f64>]) -> Result<f64> {
    if alphas.len() > n {
        return Err(Error::InvalidArgument(format!("{} asymmetric weights for {n} DMs", alphas.len())));
    }
    let g = gains(spec, 1, std::slice::from_ref(policy))?.remove(0).0;
    let uu = &g * spec.obs_covariance() * g.transpose();
    let sum: f64 = alphas.iter().map(|a| (a * &uu).trace()).sum();
    let n = n as f64;
    Ok(sum / (n * n))
}
