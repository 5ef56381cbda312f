//! Convergence and symmetry diagnostics: policy and cost gaps between the
//! N-DM optimum and the limit policy, the uniform-integrability statistic,
//! permutation invariance and symmetrisation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cost::exact_cost;
use crate::error::{Error, Result};
use crate::linalg;
use crate::mc::{self, par_map, scenario_cost, CostEstimate, MCConfig, ScenarioSampler};
use crate::model::{check_profile, policy_for, LinearPolicy, Policy, TeamSpec};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyGap {
    /// Mean over scenarios of `max_i |γ_N(v^i) − γ_∞(v^i)|`.
    pub mean: f64,
    pub se: f64,
    /// Largest per-scenario maximum.
    pub max: f64,
}

pub fn policy_gap_sup(
    spec: &TeamSpec,
    policy_n: &Policy,
    policy_inf: &Policy,
    n: usize,
    mc: &MCConfig,
) -> Result<PolicyGap> {
    spec.ensure_valid()?;
    if mc.samples == 0 || n == 0 {
        return Err(Error::InvalidArgument("samples and N must be ≥ 1".into()));
    }
    check_profile(std::slice::from_ref(policy_n), n, spec)?;
    check_profile(std::slice::from_ref(policy_inf), n, spec)?;
    let sampler = ScenarioSampler::new(spec);
    let per = par_map(mc.samples, |s| {
        let sc = sampler.sample(n, &mut rng::stream(mc.seed, s as u64));
        sc.observations.iter().map(|v| (policy_n.act(v) - policy_inf.act(v)).norm()).fold(0.0, f64::max)
    });
    let (mean, se) = mc::mean_se(&per);
    Ok(PolicyGap { mean, se, max: per.iter().copied().fold(0.0, f64::max) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evaluator {
    Exact,
    MonteCarlo(MCConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostGap {
    pub cost_n: f64,
    pub cost_inf: f64,
    /// `|J_N(γ_N) − J_N(γ_∞)|`.
    pub gap: f64,
    /// Standard error of the difference (0 when exact).
    pub se: f64,
    /// 95% half-width (0 when exact).
    pub ci: f64,
}

/// Both profiles are evaluated in the N-DM problem; the Monte Carlo evaluator
/// uses common random numbers.
pub fn cost_gap(
    spec: &TeamSpec,
    n: usize,
    policy_n: &[Policy],
    policy_inf: &[Policy],
    evaluator: &Evaluator,
) -> Result<CostGap> {
    match evaluator {
        Evaluator::Exact => {
            let a = exact_cost(spec, n, policy_n)?;
            let b = exact_cost(spec, n, policy_inf)?;
            Ok(CostGap { cost_n: a, cost_inf: b, gap: (a - b).abs(), se: 0.0, ci: 0.0 })
        }
        Evaluator::MonteCarlo(cfg) => {
            let a = mc::estimate_cost_n(spec, n, policy_n, cfg)?;
            let b = mc::estimate_cost_n(spec, n, policy_inf, cfg)?;
            let d: CostEstimate = mc::estimate_cost_difference(spec, n, policy_n, policy_inf, cfg, true)?;
            Ok(CostGap { cost_n: a.mean, cost_inf: b.mean, gap: d.mean.abs(), se: d.se, ci: d.ci95() })
        }
    }
}

/// Default exponent excess ε in `E[|X_N|^{1+ε}]`.
pub const DEFAULT_UI_EPSILON: f64 = 1.0;

/// `E[|X_N|^{1+ε}]` with `X_N` the realised average cost, by Monte Carlo.
pub fn ui_moment(spec: &TeamSpec, n: usize, policies: &[Policy], epsilon: f64, mc: &MCConfig) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be > 0".into()));
    }
    spec.ensure_valid()?;
    check_profile(policies, n, spec)?;
    if mc.samples == 0 {
        return Err(Error::InvalidArgument("samples must be ≥ 1".into()));
    }
    let sampler = ScenarioSampler::new(spec);
    let per = par_map(mc.samples, |s| {
        let sc = sampler.sample(n, &mut rng::stream(mc.seed, s as u64));
        scenario_cost(spec, &sc.states, &sc.actions(policies)).abs().powf(1.0 + epsilon)
    });
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UiStat {
    pub ns: Vec<usize>,
    pub values: Vec<f64>,
    pub sup: f64,
    /// Least-squares slope of `ln value` against `ln N`.
    pub slope: f64,
}

pub fn uniform_integrability_stat(
    spec: &TeamSpec,
    policy_inf: &[Policy],
    ns: &[usize],
    epsilon: f64,
    mc: &MCConfig,
) -> Result<UiStat> {
    let values = ns.iter().map(|&n| ui_moment(spec, n, policy_inf, epsilon, mc)).collect::<Result<Vec<_>>>()?;
    Ok(ui_summary(ns, values))
}

pub fn ui_summary(ns: &[usize], values: Vec<f64>) -> UiStat {
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let slope = if ns.len() > 1 { linalg::log_log_slope(&xs, &values) } else { 0.0 };
    UiStat { ns: ns.to_vec(), sup: values.iter().copied().fold(0.0, f64::max), values, slope }
}

/// `J_N` for the profile and for the profile with DM slots permuted
/// (`permuted[i] = policies[permutation[i]]`).
pub fn check_exchangeability(
    spec: &TeamSpec,
    n: usize,
    policies: &[Policy],
    permutation: &[usize],
    evaluator: &Evaluator,
) -> Result<(f64, f64)> {
    if permutation.len() != n || policies.len() != n {
        return Err(Error::InvalidArgument("need N policies and a permutation of 0..N".into()));
    }
    let mut seen = vec![false; n];
    for &p in permutation {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidArgument("not a permutation".into()));
        }
    }
    let permuted: Vec<Policy> = permutation.iter().map(|&p| policies[p].clone()).collect();
    let eval = |profile: &[Policy]| match evaluator {
        Evaluator::Exact => exact_cost(spec, n, profile),
        Evaluator::MonteCarlo(cfg) => Ok(mc::estimate_cost_n(spec, n, profile, cfg)?.mean),
    };
    Ok((eval(policies)?, eval(&permuted)?))
}

/// Average over all N! slot permutations. For linear rules every gain
/// occupies every slot equally often, so this is the mean gain.
pub fn symmetrize(spec: &TeamSpec, n: usize, policies: &[Policy]) -> Result<LinearPolicy> {
    check_profile(policies, n, spec)?;
    let mut sum = DMatrix::zeros(spec.action_dim, spec.obs_dim);
    for i in 0..n {
        sum += policy_for(policies, i)
            .linear_gain()
            .ok_or_else(|| Error::Capability("symmetrisation needs linear policies".into()))?;
    }
    Ok(LinearPolicy::new(sum / n as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakConvergence {
    pub ns: Vec<usize>,
    /// Bank-averaged `|∫g dQ_N − ∫g dQ|`, averaged over replicates.
    pub mean_gap: Vec<f64>,
    /// Log-log slope of `mean_gap` against N.
    pub slope: f64,
}

/// Empirical-measure gaps against the limit law for a schedule of N.
///
/// Each replicate draws a fresh N-DM scenario from the `MEASURE` stream. With
/// a shared state the reference integrals depend on the realised `x` and are
/// recomputed per replicate.
pub fn weak_convergence_curve(
    spec: &TeamSpec,
    policy: &Policy,
    ns: &[usize],
    replicates: usize,
    reference_draws: usize,
    seed: u64,
) -> Result<WeakConvergence> {
    spec.ensure_valid()?;
    if ns.is_empty() || replicates == 0 || reference_draws == 0 {
        return Err(Error::InvalidArgument("need N values, replicates and reference draws".into()));
    }
    let bank = mc::TestBank::standard(spec.action_dim, spec.obs_dim);
    let sampler = ScenarioSampler::new(spec);
    let measure_seed = rng::derive_seed(seed, rng::tags::MEASURE);
    let shared = spec.obs_model.kind == crate::model::ObservationKind::SharedState;
    let mut cached: Option<Vec<f64>> = None;
    let mut mean_gap = Vec::with_capacity(ns.len());
    for (j, &n) in ns.iter().enumerate() {
        let mut total = 0.0;
        for r in 0..replicates {
            let sc = sampler.sample(n, &mut rng::stream(measure_seed, ((j as u64) << 32) | r as u64));
            let measure = mc::empirical_measure(spec, n, policy, &sc)?;
            let law = mc::ReferenceLaw::new(spec, policy, &sc);
            let refs = if shared {
                law.integrals(&bank, reference_draws, seed ^ r as u64)
            } else {
                cached.get_or_insert_with(|| law.integrals(&bank, reference_draws, seed)).clone()
            };
            let gaps = mc::weak_convergence_stat(&measure, &refs, &bank)?;
            total += gaps.iter().sum::<f64>() / gaps.len() as f64;
        }
        mean_gap.push(total / replicates as f64);
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let slope = if ns.len() > 1 { linalg::log_log_slope(&xs, &mean_gap) } else { 0.0 };
    Ok(WeakConvergence { ns: ns.to_vec(), mean_gap, slope })
}
