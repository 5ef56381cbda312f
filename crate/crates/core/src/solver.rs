//! Team-optimal linear policies for the N-DM problems and their N → ∞ limits.
//!
//! State-coupled teams have closed forms. Control-coupled teams are solved by
//! successive approximation of the stationarity equations
//!
//! ```text
//! M π_k + C [S_k + (1/N) Σ_{p≠k} π_p H_p S_k] = 0,
//! M = R + Q/N² − 2D/N,   C = Q/N − D,   S_k = Σ_00 H_kᵀ (H_k Σ_00 H_kᵀ + Σ_zz)⁻¹,
//! ```
//!
//! started from the zero policy, and every fixed point is cross-checked
//! against a direct solve of the vectorised linear system.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{conditional_mean_gain, Coupling, LinearPolicy, ObservationKind, Policy, TeamSpec};

/// Maximum sup-norm disagreement tolerated between iteration and direct solve.
pub const CONSISTENCY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Relaxed update `π ← π − F(π)/ε` with `ε = ½(λmax(R̂) + λmin(R̂))`.
    PaperEpsilon,
    /// The plain block-Jacobi map `π_k ← −L_N[S_k + (1/N) Σ_{p≠k} π_p H_p S_k]`.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedPointConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub step_rule: StepRule,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig { tol: 1e-12, max_iter: 10_000, step_rule: StepRule::PaperEpsilon }
    }
}

impl FixedPointConfig {
    fn check(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidArgument("tol must be > 0 and max_iter ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// One policy for a symmetric solve, one per DM otherwise.
    pub policies: Vec<LinearPolicy>,
    /// The same fixed point from the direct linear solve.
    pub direct: Vec<LinearPolicy>,
    pub iterations: usize,
    /// Final sup-norm change of the gains.
    pub residual: f64,
    /// Sup-norm gain change after every iteration.
    pub residual_history: Vec<f64>,
    pub spectral_radius: f64,
    pub spectral_radius_ok: bool,
    /// Sup-norm distance between iterated and direct solutions.
    pub discrepancy: f64,
}

impl SolveResult {
    pub fn policy(&self) -> &LinearPolicy {
        &self.policies[0]
    }

    pub fn as_policies(&self) -> Vec<Policy> {
        self.policies.iter().cloned().map(Policy::from).collect()
    }
}

fn require(spec: &TeamSpec, coupling: Coupling, kind: ObservationKind) -> Result<()> {
    spec.ensure_valid()?;
    if spec.coupling != coupling || spec.obs_model.kind != kind {
        return Err(Error::InvalidArgument(format!("solver needs {coupling:?} coupling with {kind:?} observations")));
    }
    Ok(())
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidArgument("N must be positive".into()))
    } else {
        Ok(())
    }
}

fn state_coupled_scale(spec: &TeamSpec, factor: f64) -> Result<DMatrix<f64>> {
    let rq = &spec.cost.r + &spec.cost.q;
    Ok(linalg::solve_pd(&rq, &spec.cost.q, "R + Q")? * factor)
}

/// `γ_N(v) = (R+Q)⁻¹ Q (1 + 1/N) E[x|v]` for Gaussian laws, as a gain.
pub fn solve_state_coupled_n(spec: &TeamSpec, n: usize) -> Result<LinearPolicy> {
    check_n(n)?;
    require(spec, Coupling::StateCoupled, ObservationKind::PrivateIid)?;
    gaussian_state_gain(spec, 1.0 + 1.0 / n as f64)
}

/// `γ_∞(v) = (R+Q)⁻¹ Q E[x|v]` for Gaussian laws, as a gain.
pub fn solve_state_coupled_limit(spec: &TeamSpec) -> Result<LinearPolicy> {
    require(spec, Coupling::StateCoupled, ObservationKind::PrivateIid)?;
    gaussian_state_gain(spec, 1.0)
}

fn gaussian_state_gain(spec: &TeamSpec, factor: f64) -> Result<LinearPolicy> {
    let cm = conditional_mean_gain(&spec.obs_model)?;
    let k = cm.gain().ok_or_else(|| {
        Error::Capability("optimal policy is nonlinear for these laws; use state_coupled_policy".into())
    })?;
    Ok(LinearPolicy::new(state_coupled_scale(spec, factor)? * k))
}

/// The optimal state-coupled rule for any supported law (`None` = the limit).
/// For non-Gaussian laws the rule is `scale · E[x|v]` with a nonlinear
/// conditional mean.
pub fn state_coupled_policy(spec: &TeamSpec, n: Option<usize>) -> Result<Policy> {
    require(spec, Coupling::StateCoupled, ObservationKind::PrivateIid)?;
    let factor = match n {
        Some(n) => {
            check_n(n)?;
            1.0 + 1.0 / n as f64
        }
        None => 1.0,
    };
    let scale = state_coupled_scale(spec, factor)?;
    let estimator = conditional_mean_gain(&spec.obs_model)?;
    Ok(match estimator.gain() {
        Some(k) => Policy::Linear(LinearPolicy::new(scale * k)),
        None => Policy::Estimator { scale, estimator },
    })
}

/// `M = R + Q/N² − 2D/N`.
pub fn m_matrix(spec: &TeamSpec, n: usize) -> DMatrix<f64> {
    let nf = n as f64;
    &spec.cost.r + &spec.cost.q / (nf * nf) - spec.d_or_zero() * (2.0 / nf)
}

/// `C = Q/N − D`.
pub fn c_matrix(spec: &TeamSpec, n: usize) -> DMatrix<f64> {
    &spec.cost.q / n as f64 - spec.d_or_zero()
}

/// `L_N = (R + Q/N² − 2D/N)⁻¹ (Q/N − D)`.
pub fn l_n(spec: &TeamSpec, n: usize) -> Result<DMatrix<f64>> {
    linalg::solve(&m_matrix(spec, n), &c_matrix(spec, n), "M")
}

/// The second form `(N²R − 2DN + Q)⁻¹ (N²D − NQ)`, equal to `−L_N`.
pub fn l_n_expanded(spec: &TeamSpec, n: usize) -> Result<DMatrix<f64>> {
    let nf = n as f64;
    let d = spec.d_or_zero();
    let lhs = &spec.cost.r * (nf * nf) - &d * (2.0 * nf) + &spec.cost.q;
    let rhs = &d * (nf * nf) - &spec.cost.q * nf;
    linalg::solve(&lhs, &rhs, "N²R − 2DN + Q")
}

/// `S = Σ_00 Hᵀ (H Σ_00 Hᵀ + Σ_zz)⁻¹`, the linear conditional-mean gain.
pub fn estimator_gain(spec: &TeamSpec, h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !spec.is_gaussian() {
        return Err(Error::Capability("control-coupled solver needs Gaussian laws (linear conditional means)".into()));
    }
    let mut obs = spec.obs_model.clone();
    obs.h = h.clone();
    let cm = conditional_mean_gain(&obs)?;
    Ok(cm.gain().cloned().expect("Gaussian laws give a linear estimator"))
}

/// Eigenvalue range of the DM-coupling matrix `R̂` (diagonal blocks `M`,
/// off-diagonal blocks `C/N`). All off-diagonal blocks are equal, so its
/// spectrum is that of `M − C/N` (multiplicity N−1) and `M + (N−1)C/N`.
pub fn r_hat_spectrum(spec: &TeamSpec, n: usize) -> (f64, f64) {
    let m = m_matrix(spec, n);
    let b = c_matrix(spec, n) / n as f64;
    let mut blocks = vec![&m + &b * (n as f64 - 1.0)];
    if n > 1 {
        blocks.push(&m - &b);
    }
    range_of(&blocks)
}

fn range_of(blocks: &[DMatrix<f64>]) -> (f64, f64) {
    blocks.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), b| {
        (lo.min(linalg::min_eigenvalue(b)), hi.max(linalg::max_eigenvalue(b)))
    })
}

/// `ε = ½(λmax(R̂) + λmin(R̂))`.
pub fn relaxation_epsilon(spec: &TeamSpec, n: usize) -> f64 {
    let (lo, hi) = r_hat_spectrum(spec, n);
    0.5 * (lo + hi)
}

fn limit_epsilon(spec: &TeamSpec) -> f64 {
    let r = &spec.cost.r;
    let (lo, hi) = range_of(&[r.clone(), r - spec.d_or_zero()]);
    0.5 * (lo + hi)
}

/// Symmetric stationarity map `F(π) = M π + a C π W + C S`.
struct SymmetricSystem {
    m: DMatrix<f64>,
    c: DMatrix<f64>,
    a: f64,
    w: DMatrix<f64>,
    s: DMatrix<f64>,
    epsilon: f64,
}

impl SymmetricSystem {
    fn residual(&self, pi: &DMatrix<f64>) -> DMatrix<f64> {
        &self.m * pi + &self.c * pi * &self.w * self.a + &self.c * &self.s
    }

    fn step(&self, pi: &DMatrix<f64>, rule: StepRule, m_inv: &DMatrix<f64>) -> DMatrix<f64> {
        let f = self.residual(pi);
        match rule {
            StepRule::PaperEpsilon => pi - f / self.epsilon,
            StepRule::Unit => pi - m_inv * f,
        }
    }

    /// `I⊗M + a Wᵀ⊗C`, the linear part of `F` acting on `vec(π)`.
    fn operator(&self) -> DMatrix<f64> {
        let k = self.w.nrows();
        linalg::kron(&linalg::identity(k), &self.m) + linalg::kron(&self.w.transpose(), &self.c) * self.a
    }

    fn direct(&self) -> Result<DMatrix<f64>> {
        let rhs = -linalg::vectorize(&(&self.c * &self.s));
        let x = linalg::solve(
            &self.operator(),
            &DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice()),
            "stationarity system",
        )?;
        Ok(DMatrix::from_column_slice(self.m.nrows(), self.s.ncols(), x.as_slice()))
    }

    fn iteration_radius(&self, rule: StepRule, m_inv: &DMatrix<f64>) -> f64 {
        let op = self.operator();
        let dim = op.nrows();
        let t = match rule {
            StepRule::PaperEpsilon => linalg::identity(dim) - op / self.epsilon,
            StepRule::Unit => linalg::identity(dim) - linalg::kron(&linalg::identity(self.w.nrows()), m_inv) * op,
        };
        linalg::spectral_radius(&t)
    }

    fn solve(&self, cfg: &FixedPointConfig) -> Result<SolveResult> {
        cfg.check()?;
        let m_inv = linalg::inverse(&self.m, "M")?;
        let radius = self.iteration_radius(cfg.step_rule, &m_inv);
        let zero = DMatrix::zeros(self.m.nrows(), self.s.ncols());
        if self.c.iter().all(|&v| v == 0.0) {
            return Ok(trivial(vec![LinearPolicy::new(zero)], radius));
        }
        if !(radius < 1.0) {
            return Err(Error::NonContraction(radius));
        }
        let (pi, iterations, history) = iterate(zero, cfg, |p| self.step(p, cfg.step_rule, &m_inv))?;
        let direct = self.direct()?;
        finish(vec![pi], vec![direct], iterations, history, radius)
    }
}

fn trivial(policies: Vec<LinearPolicy>, radius: f64) -> SolveResult {
    SolveResult {
        direct: policies.clone(),
        policies,
        iterations: 0,
        residual: 0.0,
        residual_history: Vec::new(),
        spectral_radius: radius,
        spectral_radius_ok: radius < 1.0,
        discrepancy: 0.0,
    }
}

fn iterate<T, F>(start: T, cfg: &FixedPointConfig, mut step: F) -> Result<(T, usize, Vec<f64>)>
where
    T: Gains,
    F: FnMut(&T) -> T,
{
    let mut current = start;
    let mut history = Vec::new();
    for it in 1..=cfg.max_iter {
        let next = step(&current);
        let change = next.distance(&current);
        history.push(change);
        current = next;
        if !change.is_finite() {
            break;
        }
        if change <= cfg.tol {
            return Ok((current, it, history));
        }
    }
    Err(Error::NonConvergence { iterations: history.len(), residual: history.last().copied().unwrap_or(f64::NAN) })
}

trait Gains {
    fn distance(&self, other: &Self) -> f64;
}

impl Gains for DMatrix<f64> {
    fn distance(&self, other: &Self) -> f64 {
        linalg::sup_norm(&(self - other))
    }
}

impl Gains for Vec<DMatrix<f64>> {
    fn distance(&self, other: &Self) -> f64 {
        self.iter().zip(other).map(|(a, b)| a.distance(b)).fold(0.0, f64::max)
    }
}

fn finish(
    iterated: Vec<DMatrix<f64>>,
    direct: Vec<DMatrix<f64>>,
    iterations: usize,
    history: Vec<f64>,
    radius: f64,
) -> Result<SolveResult> {
    let discrepancy = iterated.distance(&direct);
    if !(discrepancy <= CONSISTENCY_TOL) {
        return Err(Error::Inconsistent(discrepancy));
    }
    Ok(SolveResult {
        policies: iterated.into_iter().map(LinearPolicy::new).collect(),
        direct: direct.into_iter().map(LinearPolicy::new).collect(),
        iterations,
        residual: history.last().copied().unwrap_or(0.0),
        residual_history: history,
        spectral_radius: radius,
        spectral_radius_ok: radius < 1.0,
        discrepancy,
    })
}

/// Symmetric fixed point `π_N = −L_N[S + ((N−1)/N) π_N H S]` of the N-DM
/// control-coupled team.
pub fn solve_control_coupled_n(spec: &TeamSpec, n: usize, cfg: &FixedPointConfig) -> Result<SolveResult> {
    check_n(n)?;
    require(spec, Coupling::ControlCoupled, ObservationKind::SharedState)?;
    let h = &spec.obs_model.h;
    let s = estimator_gain(spec, h)?;
    SymmetricSystem {
        m: m_matrix(spec, n),
        c: c_matrix(spec, n),
        a: (n as f64 - 1.0) / n as f64,
        w: h * &s,
        s,
        epsilon: relaxation_epsilon(spec, n),
    }
    .solve(cfg)
}

/// Limit fixed point `π_∞ = R⁻¹ D [S + π_∞ H S]`.
pub fn solve_control_coupled_limit(spec: &TeamSpec, cfg: &FixedPointConfig) -> Result<SolveResult> {
    require(spec, Coupling::ControlCoupled, ObservationKind::SharedState)?;
    let h = &spec.obs_model.h;
    let s = estimator_gain(spec, h)?;
    let d = spec.d_or_zero();
    SymmetricSystem { m: spec.cost.r.clone(), c: -d, a: 1.0, w: h * &s, s, epsilon: limit_epsilon(spec) }.solve(cfg)
}

/// Per-DM fixed point for DMs observing `v^k = H_k x + z^k`, by the parallel
/// (Jacobi) sweep: every DM is updated from the previous iterate.
pub fn solve_control_coupled_heterogeneous(
    spec: &TeamSpec,
    hs: &[DMatrix<f64>],
    cfg: &FixedPointConfig,
) -> Result<SolveResult> {
    require(spec, Coupling::ControlCoupled, ObservationKind::SharedState)?;
    cfg.check()?;
    let n = hs.len();
    check_n(n)?;
    for h in hs {
        if h.shape() != spec.obs_model.h.shape() {
            return Err(Error::Shape("observation matrix shape".into()));
        }
    }
    let nf = n as f64;
    let m = m_matrix(spec, n);
    let c = c_matrix(spec, n);
    let m_inv = linalg::inverse(&m, "M")?;
    let s: Vec<DMatrix<f64>> = hs.iter().map(|h| estimator_gain(spec, h)).collect::<Result<_>>()?;
    let epsilon = relaxation_epsilon(spec, n);
    let (rows, cols) = (spec.action_dim, spec.obs_dim);

    // F_k(π) = M π_k + C S_k + (1/N) C Σ_{p≠k} π_p H_p S_k
    let residual_k = |pis: &[DMatrix<f64>], k: usize| {
        let mut coupling = DMatrix::zeros(rows, spec.state_dim);
        for (p, pi) in pis.iter().enumerate() {
            if p != k {
                coupling += pi * &hs[p];
            }
        }
        &m * &pis[k] + &c * (&s[k] + coupling * &s[k] / nf)
    };
    let update_k = |pis: &[DMatrix<f64>], k: usize| {
        let f = residual_k(pis, k);
        match cfg.step_rule {
            StepRule::PaperEpsilon => &pis[k] - f / epsilon,
            StepRule::Unit => &pis[k] - &m_inv * f,
        }
    };

    // Dense operator on the stacked vec(π_k).
    let block = rows * cols;
    let dim = n * block;
    let mut op = DMatrix::zeros(dim, dim);
    let mut rhs = DMatrix::zeros(dim, 1);
    let eye = linalg::identity(cols);
    for (k, sk) in s.iter().enumerate() {
        let diag = linalg::kron(&eye, &m);
        op.view_mut((k * block, k * block), (block, block)).copy_from(&diag);
        for (p, hp) in hs.iter().enumerate() {
            if p != k {
                let w = hp * sk;
                let blk = linalg::kron(&w.transpose(), &c) / nf;
                op.view_mut((k * block, p * block), (block, block)).copy_from(&blk);
            }
        }
        let r = -linalg::vectorize(&(&c * sk));
        rhs.view_mut((k * block, 0), (block, 1)).copy_from(&r);
    }
    let t = match cfg.step_rule {
        StepRule::PaperEpsilon => linalg::identity(dim) - &op / epsilon,
        StepRule::Unit => {
            let pre = linalg::kron(&linalg::identity(n), &linalg::kron(&eye, &m_inv));
            linalg::identity(dim) - pre * &op
        }
    };
    let radius = linalg::spectral_radius(&t);
    let zero = vec![DMatrix::zeros(rows, cols); n];
    if c.iter().all(|&v| v == 0.0) {
        return Ok(trivial(zero.into_iter().map(LinearPolicy::new).collect(), radius));
    }
    if !(radius < 1.0) {
        return Err(Error::NonContraction(radius));
    }

    let (pis, iterations, history) = iterate(zero, cfg, |pis| sweep(n, |k| update_k(pis, k)))?;
    let x = linalg::solve(&op, &rhs, "stationarity system")?;
    let direct =
        (0..n).map(|k| DMatrix::from_column_slice(rows, cols, &x.as_slice()[k * block..(k + 1) * block])).collect();
    finish(pis, direct, iterations, history, radius)
}

#[cfg(feature = "parallel")]
fn sweep<F>(n: usize, f: F) -> Vec<DMatrix<f64>>
where
    F: Fn(usize) -> DMatrix<f64> + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn sweep<F>(n: usize, f: F) -> Vec<DMatrix<f64>>
where
    F: Fn(usize) -> DMatrix<f64>,
{
    (0..n).map(f).collect()
}
