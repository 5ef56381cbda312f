//! Data model for static mean-field teams and the dynamic LQG instance.
//!
//! A [`TeamSpec`] describes one of two cost structures:
//!
//! * `StateCoupled` with private i.i.d. states `v^i = x^i + z^i` and per-DM cost
//!   `uᵀRu + (u − x^i − μ)ᵀQ(u − x^i − μ)`, `μ` the average *state*;
//! * `ControlCoupled` with a shared state `v^i = H x + z^i` and team cost
//!   `Σ uᵀRu − 2 Σ uᵀD(x + ū) + (x + ū)ᵀQ(x + ū)`, `ū` the average *action*.
//!
//! In both cases the expected cost is normalised by `1/N`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, TOL_PD};

/// Upper bound on every dimension accepted by [`validate`].
pub const MAX_DIM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    StateCoupled,
    ControlCoupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationKind {
    /// `v^i = x^i + z^i` with i.i.d. private states.
    PrivateIid,
    /// `v^i = H x + z^i` with one shared state.
    SharedState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticCost {
    #[serde(rename = "R", with = "crate::matrix_serde")]
    pub r: DMatrix<f64>,
    #[serde(rename = "Q", with = "crate::matrix_serde")]
    pub q: DMatrix<f64>,
    #[serde(rename = "D", with = "crate::matrix_serde::option", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<DMatrix<f64>>,
}

/// Zero-mean law of a random vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseLaw {
    Gaussian {
        #[serde(with = "crate::matrix_serde")]
        covariance: DMatrix<f64>,
    },
    /// Independent coordinates, each `±magnitude` with probability 1/2.
    TwoPoint { magnitude: f64, dim: usize },
}

impl NoiseLaw {
    pub fn gaussian(covariance: DMatrix<f64>) -> Self {
        NoiseLaw::Gaussian { covariance }
    }

    pub fn scalar_gaussian(variance: f64) -> Self {
        NoiseLaw::Gaussian { covariance: linalg::scalar(variance) }
    }

    pub fn dim(&self) -> usize {
        match self {
            NoiseLaw::Gaussian { covariance } => covariance.nrows(),
            NoiseLaw::TwoPoint { dim, .. } => *dim,
        }
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        match self {
            NoiseLaw::Gaussian { covariance } => covariance.clone(),
            NoiseLaw::TwoPoint { magnitude, dim } => DMatrix::identity(*dim, *dim) * (magnitude * magnitude),
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, NoiseLaw::Gaussian { .. })
    }

    /// Draw-side representation with the covariance factor precomputed.
    pub fn sampler(&self) -> LawSampler {
        match self {
            NoiseLaw::Gaussian { covariance } => LawSampler::Gaussian(linalg::psd_factor(covariance)),
            NoiseLaw::TwoPoint { magnitude, dim } => LawSampler::TwoPoint { magnitude: *magnitude, dim: *dim },
        }
    }

    fn scalar_law(&self, j: usize) -> Option<ScalarLaw> {
        match self {
            NoiseLaw::TwoPoint { magnitude, .. } => Some(ScalarLaw::TwoPoint(*magnitude)),
            NoiseLaw::Gaussian { covariance } => {
                let n = covariance.nrows();
                let diagonal = (0..n).all(|a| (0..n).all(|b| a == b || covariance[(a, b)] == 0.0));
                diagonal.then(|| ScalarLaw::Gaussian(covariance[(j, j)]))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum LawSampler {
    Gaussian(DMatrix<f64>),
    TwoPoint { magnitude: f64, dim: usize },
}

impl LawSampler {
    pub fn dim(&self) -> usize {
        match self {
            LawSampler::Gaussian(f) => f.nrows(),
            LawSampler::TwoPoint { dim, .. } => *dim,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        match self {
            LawSampler::Gaussian(factor) => {
                let xi = DVector::from_fn(factor.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
                factor * xi
            }
            LawSampler::TwoPoint { magnitude, dim } => {
                DVector::from_fn(*dim, |_, _| if rng.random::<bool>() { *magnitude } else { -*magnitude })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationModel {
    pub kind: ObservationKind,
    #[serde(rename = "H", with = "crate::matrix_serde")]
    pub h: DMatrix<f64>,
    pub state_law: NoiseLaw,
    pub noise_law: NoiseLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeamSpec {
    pub action_dim: usize,
    pub obs_dim: usize,
    pub state_dim: usize,
    pub coupling: Coupling,
    pub cost: QuadraticCost,
    pub obs_model: ObservationModel,
}

impl TeamSpec {
    /// Scalar state-coupled instance with Gaussian private states and noise.
    pub fn scalar_state_coupled(r: f64, q: f64, var_x: f64, var_z: f64) -> Self {
        TeamSpec {
            action_dim: 1,
            obs_dim: 1,
            state_dim: 1,
            coupling: Coupling::StateCoupled,
            cost: QuadraticCost { r: linalg::scalar(r), q: linalg::scalar(q), d: None },
            obs_model: ObservationModel {
                kind: ObservationKind::PrivateIid,
                h: linalg::scalar(1.0),
                state_law: NoiseLaw::scalar_gaussian(var_x),
                noise_law: NoiseLaw::scalar_gaussian(var_z),
            },
        }
    }

    /// Control-coupled instance with a shared Gaussian state.
    pub fn control_coupled(
        r: DMatrix<f64>,
        d: DMatrix<f64>,
        q: DMatrix<f64>,
        h: DMatrix<f64>,
        sigma_x: DMatrix<f64>,
        sigma_z: DMatrix<f64>,
    ) -> Self {
        TeamSpec {
            action_dim: r.nrows(),
            obs_dim: h.nrows(),
            state_dim: h.ncols(),
            coupling: Coupling::ControlCoupled,
            cost: QuadraticCost { r, q, d: Some(d) },
            obs_model: ObservationModel {
                kind: ObservationKind::SharedState,
                h,
                state_law: NoiseLaw::gaussian(sigma_x),
                noise_law: NoiseLaw::gaussian(sigma_z),
            },
        }
    }

    pub fn scalar_control_coupled(r: f64, d: f64, q: f64, h: f64, var_x: f64, var_z: f64) -> Self {
        use linalg::scalar;
        Self::control_coupled(scalar(r), scalar(d), scalar(q), scalar(h), scalar(var_x), scalar(var_z))
    }

    pub fn is_gaussian(&self) -> bool {
        self.obs_model.state_law.is_gaussian() && self.obs_model.noise_law.is_gaussian()
    }

    pub fn d_or_zero(&self) -> DMatrix<f64> {
        self.cost.d.clone().unwrap_or_else(|| DMatrix::zeros(self.action_dim, self.action_dim))
    }

    /// Returns `Err(InvalidSpec)` listing every violated invariant.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = validate(self);
        if report.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(report.violations))
        }
    }

    /// `Σ_vv = H Σ_xx Hᵀ + Σ_zz` for a single DM.
    pub fn obs_covariance(&self) -> DMatrix<f64> {
        let h = &self.obs_model.h;
        h * self.obs_model.state_law.covariance() * h.transpose() + self.obs_model.noise_law.covariance()
    }

    /// `Σ_xv = Σ_xx Hᵀ` for a single DM.
    pub fn state_obs_covariance(&self) -> DMatrix<f64> {
        self.obs_model.state_law.covariance() * self.obs_model.h.transpose()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_law(law: &NoiseLaw, dim: usize, name: &str, need_pd: bool, out: &mut Vec<String>) {
    if law.dim() != dim {
        out.push(format!("{name} has dimension {} but {dim} is required", law.dim()));
        return;
    }
    match law {
        NoiseLaw::Gaussian { covariance } => {
            if !linalg::is_finite(covariance) || !linalg::is_symmetric(covariance) {
                out.push(format!("{name} covariance is not symmetric"));
            } else if need_pd && !linalg::is_pd(covariance) {
                out.push(format!("{name} covariance not positive definite"));
            } else if !linalg::is_psd(covariance) {
                out.push(format!("{name} covariance not positive semi-definite"));
            }
        }
        NoiseLaw::TwoPoint { magnitude, .. } => {
            if !magnitude.is_finite() || *magnitude < 0.0 {
                out.push(format!("{name} magnitude must be finite and non-negative"));
            } else if need_pd && magnitude * magnitude <= TOL_PD {
                out.push(format!("{name} covariance not positive definite"));
            }
        }
    }
}

fn check_shape(m: &DMatrix<f64>, rows: usize, cols: usize, name: &str, out: &mut Vec<String>) -> bool {
    if m.nrows() != rows || m.ncols() != cols {
        out.push(format!("{name} is {}x{}, expected {rows}x{cols}", m.nrows(), m.ncols()));
        false
    } else if !linalg::is_finite(m) {
        out.push(format!("{name} has non-finite entries"));
        false
    } else {
        true
    }
}

/// Checks every standing assumption of the static team model. An empty
/// report means the spec is valid.
pub fn validate(spec: &TeamSpec) -> ValidationReport {
    let mut v = Vec::new();
    let (n, m, s) = (spec.action_dim, spec.obs_dim, spec.state_dim);
    for (name, d) in [("action_dim", n), ("obs_dim", m), ("state_dim", s)] {
        if d == 0 || d > MAX_DIM {
            v.push(format!("{name} must be in 1..={MAX_DIM}"));
        }
    }
    if !v.is_empty() {
        return ValidationReport { violations: v };
    }

    let cost = &spec.cost;
    if check_shape(&cost.r, n, n, "R", &mut v) {
        if !linalg::is_symmetric(&cost.r) {
            v.push("R is not symmetric".into());
        } else if !linalg::is_pd(&cost.r) {
            v.push("R not positive definite".into());
        }
    }
    let q_dim = match spec.coupling {
        Coupling::StateCoupled => n,
        Coupling::ControlCoupled => s,
    };
    if check_shape(&cost.q, q_dim, q_dim, "Q", &mut v) && !linalg::is_psd(&cost.q) {
        v.push("Q not positive semi-definite".into());
    }

    match spec.coupling {
        Coupling::StateCoupled => {
            if n != s {
                v.push("state coupling requires action_dim = state_dim".into());
            }
            if cost.d.is_some() {
                v.push("D only applies to control-coupled costs".into());
            }
            if spec.obs_model.kind != ObservationKind::PrivateIid {
                v.push("state coupling requires private_iid observations".into());
            }
        }
        Coupling::ControlCoupled => {
            if n != s {
                v.push("control coupling requires action_dim = state_dim".into());
            }
            if spec.obs_model.kind != ObservationKind::SharedState {
                v.push("control coupling requires shared_state observations".into());
            }
            match &cost.d {
                None => v.push("control coupling requires D".into()),
                Some(d) => {
                    if check_shape(d, n, n, "D", &mut v) {
                        if !linalg::is_psd(d) {
                            v.push("D not positive semi-definite".into());
                        } else if linalg::is_symmetric(&cost.r) && !linalg::is_pd(&(&cost.r - d * 2.0)) {
                            v.push("R − 2D not positive definite".into());
                        }
                    }
                }
            }
        }
    }

    let obs = &spec.obs_model;
    if check_shape(&obs.h, m, s, "H", &mut v)
        && obs.kind == ObservationKind::PrivateIid
        && obs.h != DMatrix::identity(m, s)
    {
        v.push("private_iid observations require H = I".into());
    }
    check_law(&obs.state_law, s, "state law", false, &mut v);
    check_law(&obs.noise_law, m, "noise", true, &mut v);

    ValidationReport { violations: v }
}

/// One coordinate of a coordinatewise-independent law.
#[derive(Debug, Clone, Copy, PartialEq)]
enum ScalarLaw {
    Gaussian(f64),
    TwoPoint(f64),
}

/// Exact posterior of one state coordinate given `v = x + z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarPosterior {
    state: ScalarLaw,
    noise: ScalarLaw,
}

impl ScalarPosterior {
    /// Posterior over the discrete component: returns `(p_plus, plus, minus)`
    /// such that `x = plus` w.p. `p_plus`, else `x = minus`. `None` means the
    /// posterior is Gaussian.
    fn atoms(&self, v: f64) -> Option<(f64, f64, f64)> {
        match (self.state, self.noise) {
            (ScalarLaw::TwoPoint(a), ScalarLaw::Gaussian(s2)) => {
                if a == 0.0 {
                    return Some((1.0, 0.0, 0.0));
                }
                let p = 0.5 * (1.0 + (a * v / s2).tanh());
                Some((p, a, -a))
            }
            (ScalarLaw::Gaussian(s2), ScalarLaw::TwoPoint(b)) => {
                if s2 == 0.0 {
                    return Some((1.0, 0.0, 0.0));
                }
                // posterior over z = ±b, x = v − z
                let p = 0.5 * (1.0 + (b * v / s2).tanh());
                Some((p, v - b, v + b))
            }
            (ScalarLaw::TwoPoint(a), ScalarLaw::TwoPoint(b)) => {
                if a == 0.0 {
                    return Some((1.0, 0.0, 0.0));
                }
                let tol = 1e-9 * (a + b).max(1.0);
                let hit = |z: f64| (z.abs() - b).abs() <= tol;
                let wp = if hit(v - a) { 1.0 } else { 0.0 };
                let wm = if hit(v + a) { 1.0 } else { 0.0 };
                let total = wp + wm;
                if total == 0.0 {
                    Some((0.5, a, -a))
                } else {
                    Some((wp / total, a, -a))
                }
            }
            (ScalarLaw::Gaussian(_), ScalarLaw::Gaussian(_)) => None,
        }
    }

    fn gaussian_moments(&self, v: f64) -> (f64, f64) {
        match (self.state, self.noise) {
            (ScalarLaw::Gaussian(sx), ScalarLaw::Gaussian(sz)) => {
                let k = if sx + sz > 0.0 { sx / (sx + sz) } else { 0.0 };
                (k * v, sx - k * sx)
            }
            _ => unreachable!(),
        }
    }

    fn mean(&self, v: f64) -> f64 {
        match self.atoms(v) {
            Some((p, plus, minus)) => p * plus + (1.0 - p) * minus,
            None => self.gaussian_moments(v).0,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, v: f64, rng: &mut R) -> f64 {
        match self.atoms(v) {
            Some((p, plus, minus)) => {
                if rng.random::<f64>() < p {
                    plus
                } else {
                    minus
                }
            }
            None => {
                let (mean, var) = self.gaussian_moments(v);
                mean + var.max(0.0).sqrt() * rng.sample::<f64, _>(StandardNormal)
            }
        }
    }
}

/// The exact conditional-mean map `v ↦ E[x | v]` for one DM.
#[derive(Debug, Clone, PartialEq)]
pub enum ConditionalMean {
    /// Jointly Gaussian case: `E[x|v] = K v`, posterior covariance `Σ_xx − K H Σ_xx`
    /// (stored as a factor for sampling).
    Linear { gain: DMatrix<f64>, posterior_factor: DMatrix<f64> },
    /// Coordinatewise Bayes rule for laws with a two-point component.
    Coordinatewise(Vec<ScalarPosterior>),
}

impl ConditionalMean {
    pub fn gain(&self) -> Option<&DMatrix<f64>> {
        match self {
            ConditionalMean::Linear { gain, .. } => Some(gain),
            ConditionalMean::Coordinatewise(_) => None,
        }
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            ConditionalMean::Linear { gain, .. } => gain * v,
            ConditionalMean::Coordinatewise(post) => DVector::from_fn(post.len(), |j, _| post[j].mean(v[j])),
        }
    }

    /// Draws `x` from its exact conditional law given `v`.
    pub fn sample_state<R: Rng + ?Sized>(&self, v: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        match self {
            ConditionalMean::Linear { gain, posterior_factor } => {
                let xi = DVector::from_fn(posterior_factor.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
                gain * v + posterior_factor * xi
            }
            ConditionalMean::Coordinatewise(post) => DVector::from_fn(post.len(), |j, _| post[j].sample(v[j], rng)),
        }
    }
}

/// `E[x | v]` for the single-DM observation model. Gaussian laws give the
/// linear map `K = Σ_xv Σ_vv⁻¹`; laws with a two-point component give the
/// exact coordinatewise Bayes rule (requires `H = I` and independent
/// coordinates).
pub fn conditional_mean_gain(obs: &ObservationModel) -> Result<ConditionalMean> {
    let sxx = obs.state_law.covariance();
    let h = &obs.h;
    if obs.state_law.is_gaussian() && obs.noise_law.is_gaussian() {
        let svv = h * &sxx * h.transpose() + obs.noise_law.covariance();
        if !linalg::is_pd(&svv) {
            return Err(Error::IllPosedEstimator("H Σ_00 Hᵀ + Σ_zz is not positive definite".into()));
        }
        let sxv = &sxx * h.transpose();
        // K = Σ_xv Σ_vv⁻¹  ⇔  Σ_vv Kᵀ = Σ_vx
        let gain = linalg::solve_pd(&svv, &sxv.transpose(), "Σ_vv")?.transpose();
        let post_cov = &sxx - &gain * h * &sxx;
        let post_cov = (&post_cov + post_cov.transpose()) * 0.5;
        return Ok(ConditionalMean::Linear { gain, posterior_factor: linalg::psd_factor(&post_cov) });
    }
    let d = h.ncols();
    if h.nrows() != d || *h != DMatrix::identity(d, d) {
        return Err(Error::Capability("non-Gaussian conditional means need H = I".into()));
    }
    let mut post = Vec::with_capacity(d);
    for j in 0..d {
        let state = obs.state_law.scalar_law(j);
        let noise = obs.noise_law.scalar_law(j);
        match (state, noise) {
            (Some(state), Some(noise)) => {
                if let ScalarLaw::Gaussian(s2) = noise {
                    if s2 <= TOL_PD {
                        return Err(Error::IllPosedEstimator("noise variance is zero".into()));
                    }
                }
                post.push(ScalarPosterior { state, noise });
            }
            _ => return Err(Error::Capability("mixed laws need diagonal Gaussian covariances".into())),
        }
    }
    Ok(ConditionalMean::Coordinatewise(post))
}

/// `u = gain · v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPolicy {
    #[serde(with = "crate::matrix_serde")]
    pub gain: DMatrix<f64>,
}

impl LinearPolicy {
    pub fn new(gain: DMatrix<f64>) -> Self {
        LinearPolicy { gain }
    }

    pub fn scalar(g: f64) -> Self {
        LinearPolicy::new(linalg::scalar(g))
    }

    pub fn zero(action_dim: usize, obs_dim: usize) -> Self {
        LinearPolicy::new(DMatrix::zeros(action_dim, obs_dim))
    }

    pub fn act(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.gain * v
    }
}

/// A decision rule mapping a DM's observation to its action.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Linear(LinearPolicy),
    /// `u = scale · E[x | v]` for a possibly nonlinear conditional mean.
    Estimator {
        scale: DMatrix<f64>,
        estimator: ConditionalMean,
    },
}

impl From<LinearPolicy> for Policy {
    fn from(p: LinearPolicy) -> Self {
        Policy::Linear(p)
    }
}

impl Policy {
    pub fn act(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Policy::Linear(p) => p.act(v),
            Policy::Estimator { scale, estimator } => scale * estimator.apply(v),
        }
    }

    /// The equivalent gain when the rule is linear in `v`.
    pub fn linear_gain(&self) -> Option<DMatrix<f64>> {
        match self {
            Policy::Linear(p) => Some(p.gain.clone()),
            Policy::Estimator { scale, estimator } => estimator.gain().map(|k| scale * k),
        }
    }

    /// Adds `delta` to the gain (linear rules) or to the scale (estimator rules).
    pub fn perturbed(&self, delta: &DMatrix<f64>) -> Result<Policy> {
        let check = |m: &DMatrix<f64>| {
            if m.shape() != delta.shape() {
                Err(Error::Shape(format!("perturbation is {:?}, policy matrix is {:?}", delta.shape(), m.shape())))
            } else {
                Ok(())
            }
        };
        Ok(match self {
            Policy::Linear(p) => {
                check(&p.gain)?;
                Policy::Linear(LinearPolicy::new(&p.gain + delta))
            }
            Policy::Estimator { scale, estimator } => {
                check(scale)?;
                Policy::Estimator { scale: scale + delta, estimator: estimator.clone() }
            }
        })
    }

    pub fn scaled(&self, factor: f64) -> Policy {
        match self {
            Policy::Linear(p) => Policy::Linear(LinearPolicy::new(&p.gain * factor)),
            Policy::Estimator { scale, estimator } => {
                Policy::Estimator { scale: scale * factor, estimator: estimator.clone() }
            }
        }
    }
}

/// Resolves DM `i`'s rule from a profile that is either symmetric (one rule)
/// or per-DM (`n` rules).
pub fn policy_for(policies: &[Policy], i: usize) -> &Policy {
    if policies.len() == 1 {
        &policies[0]
    } else {
        &policies[i]
    }
}

pub(crate) fn check_profile(policies: &[Policy], n: usize, spec: &TeamSpec) -> Result<()> {
    if policies.len() != 1 && policies.len() != n {
        return Err(Error::Shape(format!("expected 1 or {n} policies, got {}", policies.len())));
    }
    for p in policies {
        let shape = match p {
            Policy::Linear(l) => l.gain.shape(),
            Policy::Estimator { scale, .. } => (scale.nrows(), spec.obs_dim),
        };
        if shape != (spec.action_dim, spec.obs_dim) {
            return Err(Error::Shape(format!(
                "policy maps {}→{}, spec needs {}→{}",
                shape.1, shape.0, spec.obs_dim, spec.action_dim
            )));
        }
    }
    Ok(())
}

/// `X_{t+1} = A X_t + B u_t + w_t` with average cost `E[XᵀQX + uᵀRu]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicLQGSpec {
    #[serde(rename = "A", with = "crate::matrix_serde")]
    pub a: DMatrix<f64>,
    #[serde(rename = "B", with = "crate::matrix_serde")]
    pub b: DMatrix<f64>,
    #[serde(rename = "Q", with = "crate::matrix_serde")]
    pub q: DMatrix<f64>,
    #[serde(rename = "R", with = "crate::matrix_serde")]
    pub r: DMatrix<f64>,
    #[serde(with = "crate::matrix_serde")]
    pub sigma_w: DMatrix<f64>,
    #[serde(with = "crate::matrix_serde")]
    pub sigma_0: DMatrix<f64>,
}

impl DynamicLQGSpec {
    pub fn scalar(a: f64, b: f64, q: f64, r: f64, sigma_w: f64, sigma_0: f64) -> Self {
        use linalg::scalar;
        DynamicLQGSpec {
            a: scalar(a),
            b: scalar(b),
            q: scalar(q),
            r: scalar(r),
            sigma_w: scalar(sigma_w),
            sigma_0: scalar(sigma_0),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// Shape and definiteness checks; controllability is checked separately.
    pub fn validate(&self) -> ValidationReport {
        let mut v = Vec::new();
        let n = self.a.nrows();
        let m = self.b.ncols();
        if n == 0 || n > MAX_DIM || m == 0 || m > MAX_DIM {
            v.push(format!("dimensions must be in 1..={MAX_DIM}"));
            return ValidationReport { violations: v };
        }
        check_shape(&self.a, n, n, "A", &mut v);
        check_shape(&self.b, n, m, "B", &mut v);
        if check_shape(&self.q, n, n, "Q", &mut v) && !linalg::is_psd(&self.q) {
            v.push("Q not positive semi-definite".into());
        }
        if check_shape(&self.r, m, m, "R", &mut v) && !linalg::is_pd(&self.r) {
            v.push("R not positive definite".into());
        }
        if check_shape(&self.sigma_w, n, n, "sigma_w", &mut v) && !linalg::is_pd(&self.sigma_w) {
            v.push("sigma_w not positive definite".into());
        }
        if check_shape(&self.sigma_0, n, n, "sigma_0", &mut v) && !linalg::is_pd(&self.sigma_0) {
            v.push("sigma_0 not positive definite".into());
        }
        ValidationReport { violations: v }
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(report.violations))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn scalar_instance_is_valid() {
        assert!(validate(&TeamSpec::scalar_state_coupled(1.0, 1.0, 1.0, 1.0)).is_valid());
    }

    #[test]
    fn r_minus_two_d_must_be_pd() {
        let spec = TeamSpec::scalar_control_coupled(1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        let report = validate(&spec);
        assert!(report.violations.iter().any(|v| v.contains("R − 2D not positive definite")));
    }

    #[test]
    fn zero_noise_is_rejected() {
        let spec = TeamSpec::scalar_state_coupled(1.0, 1.0, 1.0, 0.0);
        let report = validate(&spec);
        assert!(report.violations.iter().any(|v| v.contains("noise covariance not positive definite")));
    }

    #[test]
    fn wrong_observation_kind_is_rejected() {
        let mut spec = TeamSpec::scalar_state_coupled(1.0, 1.0, 1.0, 1.0);
        spec.obs_model.kind = ObservationKind::SharedState;
        assert!(!validate(&spec).is_valid());
        spec.obs_model.kind = ObservationKind::PrivateIid;
        spec.cost.d = Some(linalg::scalar(0.1));
        assert!(!validate(&spec).is_valid());
    }

    #[test]
    fn oversized_dimensions_are_rejected() {
        let mut spec = TeamSpec::scalar_state_coupled(1.0, 1.0, 1.0, 1.0);
        spec.action_dim = MAX_DIM + 1;
        assert!(!validate(&spec).is_valid());
    }

    #[test]
    fn gaussian_gain_scalar() {
        let spec = TeamSpec::scalar_state_coupled(1.0, 1.0, 1.0, 1.0);
        let k = conditional_mean_gain(&spec.obs_model).unwrap();
        assert!((k.gain().unwrap()[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gaussian_gain_uninformative() {
        let spec = TeamSpec::scalar_state_coupled(1.0, 1.0, 1.0, 1e12);
        let k = conditional_mean_gain(&spec.obs_model).unwrap();
        assert!(k.gain().unwrap()[(0, 0)].abs() < 1e-11);
    }

    #[test]
    fn gaussian_gain_vector() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let obs = ObservationModel {
            kind: ObservationKind::SharedState,
            h: i2.clone(),
            state_law: NoiseLaw::gaussian(i2.clone()),
            noise_law: NoiseLaw::gaussian(i2.clone()),
        };
        let k = conditional_mean_gain(&obs).unwrap();
        assert!((k.gain().unwrap() - i2 * 0.5).amax() < 1e-15);
    }

    #[test]
    fn singular_observation_covariance_is_ill_posed() {
        let obs = ObservationModel {
            kind: ObservationKind::SharedState,
            h: linalg::scalar(1.0),
            state_law: NoiseLaw::scalar_gaussian(0.0),
            noise_law: NoiseLaw::scalar_gaussian(0.0),
        };
        assert!(matches!(conditional_mean_gain(&obs), Err(Error::IllPosedEstimator(_))));
    }

    #[test]
    fn gain_is_scale_invariant() {
        let spec = TeamSpec::scalar_control_coupled(3.0, 1.0, 1.0, 0.7, 2.0, 0.5);
        let k1 = conditional_mean_gain(&spec.obs_model).unwrap();
        let mut scaled = spec.obs_model.clone();
        scaled.state_law = NoiseLaw::scalar_gaussian(2.0 * 37.0);
        scaled.noise_law = NoiseLaw::scalar_gaussian(0.5 * 37.0);
        let k2 = conditional_mean_gain(&scaled).unwrap();
        assert!((k1.gain().unwrap() - k2.gain().unwrap()).amax() < 1e-14);
    }

    #[test]
    fn two_point_estimator_matches_bayes() {
        // x = ±1, z ~ N(0, 1): E[x|v] = tanh(v).
        let obs = ObservationModel {
            kind: ObservationKind::PrivateIid,
            h: linalg::scalar(1.0),
            state_law: NoiseLaw::TwoPoint { magnitude: 1.0, dim: 1 },
            noise_law: NoiseLaw::scalar_gaussian(1.0),
        };
        let cm = conditional_mean_gain(&obs).unwrap();
        assert!(cm.gain().is_none());
        for v in [-2.0, -0.3, 0.0, 0.8, 3.0] {
            let got = cm.apply(&DVector::from_element(1, v))[0];
            assert!((got - f64::tanh(v)).abs() < 1e-15);
        }
    }

    #[test]
    fn two_point_both_sides_is_exact() {
        // x = ±1, z = ±0.5: v determines x.
        let obs = ObservationModel {
            kind: ObservationKind::PrivateIid,
            h: linalg::scalar(1.0),
            state_law: NoiseLaw::TwoPoint { magnitude: 1.0, dim: 1 },
            noise_law: NoiseLaw::TwoPoint { magnitude: 0.5, dim: 1 },
        };
        let cm = conditional_mean_gain(&obs).unwrap();
        for (v, x) in [(1.5, 1.0), (0.5, 1.0), (-0.5, -1.0), (-1.5, -1.0)] {
            assert_eq!(cm.apply(&DVector::from_element(1, v))[0], x);
        }
    }

    #[test]
    fn gaussian_orthogonality_holds_empirically() {
        let spec = TeamSpec::scalar_state_coupled(1.0, 1.0, 1.0, 1.0);
        let cm = conditional_mean_gain(&spec.obs_model).unwrap();
        let sx = spec.obs_model.state_law.sampler();
        let sz = spec.obs_model.noise_law.sampler();
        let m = 200_000;
        let mut rng = stream(11, 0);
        let mut vals = Vec::with_capacity(m);
        for _ in 0..m {
            let x = sx.sample(&mut rng);
            let v = &x + sz.sample(&mut rng);
            vals.push((x - cm.apply(&v))[0] * v[0]);
        }
        let mean = vals.iter().sum::<f64>() / m as f64;
        let var = vals.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        let se = (var / m as f64).sqrt();
        assert!(mean.abs() < 5.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn spec_serde_rejects_unknown_keys() {
        let spec = TeamSpec::scalar_state_coupled(1.0, 1.0, 1.0, 1.0);
        let text = toml::to_string(&spec).unwrap();
        let back: TeamSpec = toml::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let bad = format!("bogus = 1\n{text}");
        assert!(toml::from_str::<TeamSpec>(&bad).is_err());
    }
}
