//! Seeded Monte Carlo for static teams.
//!
//! Scenario `s` is drawn from stream `(seed, s)`. Per-scenario values are
//! computed in parallel and reduced serially in index order, so results do not
//! depend on the thread count.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    check_profile, conditional_mean_gain, policy_for, ConditionalMean, Coupling, LawSampler, ObservationKind, Policy,
    TeamSpec,
};
use crate::rng::{self, tags, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MCConfig {
    pub samples: usize,
    pub seed: u64,
    /// Evaluate every scenario together with its mirror image `ω → −ω`.
    pub antithetic: bool,
}

impl Default for MCConfig {
    fn default() -> Self {
        MCConfig { samples: 10_000, seed: 0, antithetic: false }
    }
}

impl MCConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        MCConfig { samples, seed, antithetic: false }
    }

    fn check(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidArgument("samples must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Maps `f` over `0..count` and returns the results in index order.
#[cfg(feature = "parallel")]
pub fn par_map<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T, F>(count: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..count).map(f).collect()
}

/// Sample mean and its standard error (0 for a single value).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One joint draw of the primitives for N DMs.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// One shared state, or one private state per DM.
    pub states: Vec<DVector<f64>>,
    pub noises: Vec<DVector<f64>>,
    pub observations: Vec<DVector<f64>>,
}

impl Scenario {
    pub fn n(&self) -> usize {
        self.observations.len()
    }

    /// The state DM `i` observes.
    pub fn state(&self, i: usize) -> &DVector<f64> {
        if self.states.len() == 1 {
            &self.states[0]
        } else {
            &self.states[i]
        }
    }

    fn negated(&self) -> Scenario {
        let neg = |v: &Vec<DVector<f64>>| v.iter().map(|x| -x).collect();
        Scenario { states: neg(&self.states), noises: neg(&self.noises), observations: neg(&self.observations) }
    }

    pub fn actions(&self, policies: &[Policy]) -> Vec<DVector<f64>> {
        self.observations.iter().enumerate().map(|(i, v)| policy_for(policies, i).act(v)).collect()
    }
}

/// Pre-built samplers for a spec, so factorisations happen once.
pub struct ScenarioSampler<'a> {
    spec: &'a TeamSpec,
    state: LawSampler,
    noise: LawSampler,
}

impl<'a> ScenarioSampler<'a> {
    pub fn new(spec: &'a TeamSpec) -> Self {
        ScenarioSampler { spec, state: spec.obs_model.state_law.sampler(), noise: spec.obs_model.noise_law.sampler() }
    }

    fn observe(&self, x: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        match self.spec.obs_model.kind {
            ObservationKind::PrivateIid => x + z,
            ObservationKind::SharedState => &self.spec.obs_model.h * x + z,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Scenario {
        let mut states = Vec::with_capacity(n);
        let mut noises = Vec::with_capacity(n);
        let mut observations = Vec::with_capacity(n);
        match self.spec.obs_model.kind {
            ObservationKind::PrivateIid => {
                for _ in 0..n {
                    let x = self.state.sample(rng);
                    let z = self.noise.sample(rng);
                    observations.push(self.observe(&x, &z));
                    states.push(x);
                    noises.push(z);
                }
            }
            ObservationKind::SharedState => {
                let x = self.state.sample(rng);
                for _ in 0..n {
                    let z = self.noise.sample(rng);
                    observations.push(self.observe(&x, &z));
                    noises.push(z);
                }
                states.push(x);
            }
        }
        Scenario { states, noises, observations }
    }
}

pub fn sample_scenario<R: Rng + ?Sized>(spec: &TeamSpec, n: usize, rng: &mut R) -> Scenario {
    ScenarioSampler::new(spec).sample(n, rng)
}

/// The realised average cost `(1/N) Σ_i c(ω, u^i, mean field)`.
pub fn scenario_cost(spec: &TeamSpec, states: &[DVector<f64>], actions: &[DVector<f64>]) -> f64 {
    let n = actions.len() as f64;
    let r = &spec.cost.r;
    let q = &spec.cost.q;
    match spec.coupling {
        Coupling::StateCoupled => {
            let mu = states.iter().fold(DVector::zeros(spec.state_dim), |acc, x| acc + x) / n;
            let total: f64 = actions
                .iter()
                .zip(states)
                .map(|(u, x)| {
                    let e = u - x - &mu;
                    u.dot(&(r * u)) + e.dot(&(q * &e))
                })
                .sum();
            total / n
        }
        Coupling::ControlCoupled => {
            let d = spec.d_or_zero();
            let u_bar = actions.iter().fold(DVector::zeros(spec.action_dim), |acc, u| acc + u) / n;
            let target = &states[0] + &u_bar;
            let dt = &d * &target;
            let own: f64 = actions.iter().map(|u| u.dot(&(r * u)) - 2.0 * u.dot(&dt)).sum();
            (own + target.dot(&(q * &target))) / n
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub mean: f64,
    pub se: f64,
    pub samples: usize,
}

impl CostEstimate {
    fn from_values(values: &[f64]) -> Self {
        let (mean, se) = mean_se(values);
        CostEstimate { mean, se, samples: values.len() }
    }

    /// Half-width of the 95% normal confidence interval.
    pub fn ci95(&self) -> f64 {
        1.96 * self.se
    }
}

fn per_scenario_costs(spec: &TeamSpec, n: usize, policies: &[Policy], mc: &MCConfig, seed: u64) -> Vec<f64> {
    let sampler = ScenarioSampler::new(spec);
    par_map(mc.samples, |s| {
        let sc = sampler.sample(n, &mut rng::stream(seed, s as u64));
        let value = scenario_cost(spec, &sc.states, &sc.actions(policies));
        if mc.antithetic {
            let mirror = sc.negated();
            0.5 * (value + scenario_cost(spec, &mirror.states, &mirror.actions(policies)))
        } else {
            value
        }
    })
}

fn check_inputs(spec: &TeamSpec, n: usize, policies: &[Policy], mc: &MCConfig) -> Result<()> {
    spec.ensure_valid()?;
    mc.check()?;
    if n == 0 {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    check_profile(policies, n, spec)
}

/// Monte Carlo `J_N` for a symmetric (one policy) or per-DM profile.
pub fn estimate_cost_n(spec: &TeamSpec, n: usize, policies: &[Policy], mc: &MCConfig) -> Result<CostEstimate> {
    check_inputs(spec, n, policies, mc)?;
    Ok(CostEstimate::from_values(&per_scenario_costs(spec, n, policies, mc, mc.seed)))
}

/// Estimate of `J_N(a) − J_N(b)`. With `common_numbers` both arms see the
/// same scenarios; otherwise arm `b` uses an independent stream.
pub fn estimate_cost_difference(
    spec: &TeamSpec,
    n: usize,
    a: &[Policy],
    b: &[Policy],
    mc: &MCConfig,
    common_numbers: bool,
) -> Result<CostEstimate> {
    check_inputs(spec, n, a, mc)?;
    check_profile(b, n, spec)?;
    let ca = per_scenario_costs(spec, n, a, mc, mc.seed);
    if common_numbers {
        let cb = per_scenario_costs(spec, n, b, mc, mc.seed);
        let diff: Vec<f64> = ca.iter().zip(&cb).map(|(x, y)| x - y).collect();
        Ok(CostEstimate::from_values(&diff))
    } else {
        let cb = per_scenario_costs(spec, n, b, mc, rng::derive_seed(mc.seed, tags::REFERENCE));
        let (ma, sa) = mean_se(&ca);
        let (mb, sb) = mean_se(&cb);
        Ok(CostEstimate { mean: ma - mb, se: (sa * sa + sb * sb).sqrt(), samples: mc.samples })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationarityConfig {
    /// Central finite-difference step.
    pub fd_step: f64,
    /// Conditional resamples per outer observation.
    pub inner_samples: usize,
}

impl Default for StationarityConfig {
    fn default() -> Self {
        StationarityConfig { fd_step: 1e-4, inner_samples: 16 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityResidual {
    pub dm: usize,
    /// Largest |entry| of the moment statistic.
    pub residual: f64,
    /// Standard error of that entry.
    pub se: f64,
    /// Largest |entry| / SE over all entries.
    pub z: f64,
}

/// Conditional-gradient test of stationarity for every DM.
///
/// For outer draws of `v^i`, the conditional expected cost given `v^i` is
/// approximated by `inner_samples` completions of the scenario drawn from the
/// exact conditional law of the unobserved primitives. Its central
/// finite-difference gradient `g_s` at `u^i = γ^i(v^i)` is a noisy copy of
/// `∇E[c | v^i]`, which must vanish for every `v^i` at a stationary profile.
/// The statistic is the sample mean of `g_s ⊗ (1, v_s)`: zero in expectation
/// at a stationary profile, and non-zero whenever the gradient correlates with
/// a constant or linear function of the observation.
pub fn stationarity_residual(
    spec: &TeamSpec,
    n: usize,
    policies: &[Policy],
    mc: &MCConfig,
    cfg: &StationarityConfig,
) -> Result<Vec<StationarityResidual>> {
    check_inputs(spec, n, policies, mc)?;
    if !(cfg.fd_step > 0.0) || cfg.inner_samples == 0 {
        return Err(Error::InvalidArgument("fd_step must be > 0 and inner_samples ≥ 1".into()));
    }
    if mc.samples < 2 {
        return Err(Error::InvalidArgument("stationarity needs at least two samples".into()));
    }
    let posterior = conditional_mean_gain(&spec.obs_model)?;
    let sampler = ScenarioSampler::new(spec);
    let cond_seed = rng::derive_seed(mc.seed, tags::CONDITIONAL);
    (0..n)
        .map(|i| {
            let dm_seed = rng::derive_seed(cond_seed, i as u64);
            let rows = par_map(mc.samples, |s| {
                let outer = sampler.sample(n, &mut rng::stream(mc.seed, s as u64));
                let v = &outer.observations[i];
                let mut r = rng::stream(dm_seed, s as u64);
                let g = conditional_gradient(spec, &sampler, &posterior, n, i, v, policies, cfg, &mut r);
                let mut row = Vec::with_capacity(g.len() * (v.len() + 1));
                for gk in g.iter() {
                    row.push(*gk);
                    row.extend(v.iter().map(|vj| gk * vj));
                }
                row
            });
            Ok(summarise(i, &rows))
        })
        .collect()
}

fn summarise(dm: usize, rows: &[Vec<f64>]) -> StationarityResidual {
    let width = rows[0].len();
    let mut out = StationarityResidual { dm, residual: 0.0, se: 0.0, z: 0.0 };
    for e in 0..width {
        let col: Vec<f64> = rows.iter().map(|r| r[e]).collect();
        let (m, se) = mean_se(&col);
        let z = if se > 0.0 {
            m.abs() / se
        } else if m == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if m.abs() > out.residual {
            out.residual = m.abs();
            out.se = se;
        }
        out.z = out.z.max(z);
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn conditional_gradient(
    spec: &TeamSpec,
    sampler: &ScenarioSampler,
    posterior: &ConditionalMean,
    n: usize,
    i: usize,
    v: &DVector<f64>,
    policies: &[Policy],
    cfg: &StationarityConfig,
    r: &mut StreamRng,
) -> DVector<f64> {
    let u0 = policy_for(policies, i).act(v);
    let h = cfg.fd_step;
    let mut grad = DVector::zeros(u0.len());
    for _ in 0..cfg.inner_samples {
        let mut sc = sampler.sample(n, r);
        // Replace DM i's unobserved primitives by a draw consistent with v.
        let x = posterior.sample_state(v, r);
        match spec.obs_model.kind {
            ObservationKind::PrivateIid => {
                sc.noises[i] = v - &x;
                sc.states[i] = x;
            }
            ObservationKind::SharedState => {
                sc.noises[i] = v - &spec.obs_model.h * &x;
                sc.states[0] = x;
                for p in 0..n {
                    if p != i {
                        sc.observations[p] = &spec.obs_model.h * &sc.states[0] + &sc.noises[p];
                    }
                }
            }
        }
        sc.observations[i] = v.clone();
        let mut actions = sc.actions(policies);
        for k in 0..u0.len() {
            actions[i] = u0.clone();
            actions[i][k] += h;
            let up = scenario_cost(spec, &sc.states, &actions);
            actions[i][k] = u0[k] - h;
            let down = scenario_cost(spec, &sc.states, &actions);
            grad[k] += (up - down) / (2.0 * h);
        }
    }
    grad / cfg.inner_samples as f64
}

/// `J_N(profile with DM j's gain shifted by δ) − J_N(profile)` for each δ,
/// under common random numbers.
pub fn pbp_deviation_test(
    spec: &TeamSpec,
    n: usize,
    policies: &[Policy],
    dm_index: usize,
    perturbations: &[DMatrix<f64>],
    mc: &MCConfig,
) -> Result<Vec<CostEstimate>> {
    check_inputs(spec, n, policies, mc)?;
    if dm_index >= n {
        return Err(Error::InvalidArgument(format!("dm_index {dm_index} out of range for N = {n}")));
    }
    let baseline: Vec<Policy> = (0..n).map(|i| policy_for(policies, i).clone()).collect();
    perturbations
        .iter()
        .map(|delta| {
            let mut profile = baseline.clone();
            profile[dm_index] = baseline[dm_index].perturbed(delta)?;
            estimate_cost_difference(spec, n, &profile, &baseline, mc, true)
        })
        .collect()
}

/// Uniform distribution over the realised `(action, observation)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    pub atoms: Vec<(DVector<f64>, DVector<f64>)>,
}

impl EmpiricalMeasure {
    pub fn weight(&self) -> f64 {
        1.0 / self.atoms.len() as f64
    }

    pub fn integrate(&self, f: &TestFunction) -> f64 {
        if let TestFunction::Constant(c) = f {
            return *c;
        }
        self.atoms.iter().map(|(u, v)| f.eval(u, v)).sum::<f64>() / self.atoms.len() as f64
    }

    pub fn mean_action(&self) -> DVector<f64> {
        let dim = self.atoms[0].0.len();
        self.atoms.iter().fold(DVector::zeros(dim), |acc, (u, _)| acc + u) / self.atoms.len() as f64
    }
}

pub fn empirical_measure(spec: &TeamSpec, n: usize, policy: &Policy, scenario: &Scenario) -> Result<EmpiricalMeasure> {
    check_profile(std::slice::from_ref(policy), n, spec)?;
    if scenario.n() != n {
        return Err(Error::Shape(format!("scenario has {} DMs, expected {n}", scenario.n())));
    }
    Ok(EmpiricalMeasure { atoms: scenario.observations.iter().map(|v| (policy.act(v), v.clone())).collect() })
}

#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `tanh(aᵀu + bᵀv + c)`
    Tanh {
        a: DVector<f64>,
        b: DVector<f64>,
        c: f64,
    },
    Constant(f64),
}

impl TestFunction {
    pub fn eval(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        match self {
            TestFunction::Tanh { a, b, c } => (a.dot(u) + b.dot(v) + c).tanh(),
            TestFunction::Constant(c) => *c,
        }
    }
}

/// Version of the default bank; bump when the generator changes.
pub const TEST_BANK_VERSION: u64 = 1;
pub const TEST_BANK_SIZE: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct TestBank {
    pub functions: Vec<TestFunction>,
}

impl TestBank {
    /// The fixed 16-function tanh bank for the given dimensions.
    pub fn standard(action_dim: usize, obs_dim: usize) -> Self {
        let mut r = rng::stream(rng::derive_seed(TEST_BANK_VERSION, tags::TEST_BANK), 0);
        let mut normal = |len: usize| DVector::from_fn(len, |_, _| StandardNormal.sample(&mut r));
        let functions = (0..TEST_BANK_SIZE)
            .map(|_| {
                let a = normal(action_dim);
                let b = normal(obs_dim);
                let c = normal(1)[0];
                TestFunction::Tanh { a, b, c }
            })
            .collect();
        TestBank { functions }
    }
}

/// Draws single `(γ(v), v)` pairs from the limit law of the atoms.
///
/// With private observations the atoms are i.i.d. draws from the marginal law
/// of `v`. With a shared state the atoms are i.i.d. only given `x`, so the
/// reference law is the law of `Hx + z` for the realised `x`.
pub struct ReferenceLaw<'a> {
    spec: &'a TeamSpec,
    policy: &'a Policy,
    state: Option<DVector<f64>>,
    sampler: ScenarioSampler<'a>,
}

impl<'a> ReferenceLaw<'a> {
    pub fn new(spec: &'a TeamSpec, policy: &'a Policy, scenario: &Scenario) -> Self {
        let state = match spec.obs_model.kind {
            ObservationKind::PrivateIid => None,
            ObservationKind::SharedState => Some(scenario.states[0].clone()),
        };
        ReferenceLaw { spec, policy, state, sampler: ScenarioSampler::new(spec) }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (DVector<f64>, DVector<f64>) {
        let v = match &self.state {
            None => self.sampler.sample(1, rng).observations.remove(0),
            Some(x) => &self.spec.obs_model.h * x + self.sampler.noise.sample(rng),
        };
        (self.policy.act(&v), v)
    }

    /// `∫ g dQ` for every bank function from `draws` reference samples.
    pub fn integrals(&self, bank: &TestBank, draws: usize, seed: u64) -> Vec<f64> {
        const CHUNK: usize = 4096;
        let chunks = draws.div_ceil(CHUNK);
        let partial = par_map(chunks, |c| {
            let mut r = rng::stream(rng::derive_seed(seed, tags::REFERENCE), c as u64);
            let mut sums = vec![0.0; bank.functions.len()];
            for _ in c * CHUNK..((c + 1) * CHUNK).min(draws) {
                let (u, v) = self.sample(&mut r);
                for (s, f) in sums.iter_mut().zip(&bank.functions) {
                    *s += f.eval(&u, &v);
                }
            }
            sums
        });
        let mut total = vec![0.0; bank.functions.len()];
        for p in partial {
            for (t, s) in total.iter_mut().zip(p) {
                *t += s;
            }
        }
        bank.functions
            .iter()
            .zip(total)
            .map(|(f, t)| match f {
                TestFunction::Constant(c) => *c,
                _ => t / draws as f64,
            })
            .collect()
    }
}

/// Default number of reference draws for `∫ g dQ`.
pub const REFERENCE_DRAWS: usize = 1_000_000;

/// `|∫ g dQ_N − ∫ g dQ|` for every bank function, given precomputed reference
/// integrals.
pub fn weak_convergence_stat(measure: &EmpiricalMeasure, reference: &[f64], bank: &TestBank) -> Result<Vec<f64>> {
    if bank.functions.is_empty() || reference.len() != bank.functions.len() {
        return Err(Error::InvalidArgument("test bank must be nonempty and match the reference".into()));
    }
    Ok(bank.functions.iter().zip(reference).map(|(f, r)| (measure.integrate(f) - r).abs()).collect())
}
