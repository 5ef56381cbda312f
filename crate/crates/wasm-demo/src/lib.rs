//! Browser bindings for three interactive views: optimal gain against N,
//! Riccati convergence with the finite-horizon cost gap, and the Monte Carlo
//! policy gap. Every export returns a curve object whose arrays the page plots.

use mfteam::cost::exact_cost;
use mfteam::diagnostics::policy_gap_sup;
use mfteam::mc::MCConfig;
use mfteam::model::{Policy, TeamSpec};
use mfteam::riccati::{self, RiccatiConfig};
use mfteam::solver::{self, FixedPointConfig};
use mfteam::DynamicLQGSpec;
use wasm_bindgen::prelude::*;

/// Named arrays of equal length plus a few scalars.
#[wasm_bindgen]
#[derive(Debug, Clone, Default)]
pub struct Curve {
    xs: Vec<f64>,
    ys: Vec<f64>,
    aux: Vec<f64>,
    limit: f64,
}

#[wasm_bindgen]
impl Curve {
    #[wasm_bindgen(getter)]
    pub fn xs(&self) -> Vec<f64> {
        self.xs.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn ys(&self) -> Vec<f64> {
        self.ys.clone()
    }

    /// Second series (cost gap, or standard error for the Monte Carlo view).
    #[wasm_bindgen(getter)]
    pub fn aux(&self) -> Vec<f64> {
        self.aux.clone()
    }

    /// Limit value (limit gain or `K`).
    #[wasm_bindgen(getter)]
    pub fn limit(&self) -> f64 {
        self.limit
    }
}

fn js_err(e: mfteam::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Roughly log-spaced integers from 1 to `n_max`.
fn schedule(n_max: usize) -> Vec<usize> {
    let mut ns: Vec<usize> = (0..=40).map(|k| (n_max as f64).powf(k as f64 / 40.0).round() as usize).collect();
    ns.dedup();
    ns
}

fn scalar_spec(control: bool, r: f64, q: f64, d: f64, var_x: f64, var_z: f64) -> mfteam::Result<TeamSpec> {
    let spec = if control {
        TeamSpec::scalar_control_coupled(r, d, q, 1.0, var_x, var_z)
    } else {
        TeamSpec::scalar_state_coupled(r, q, var_x, var_z)
    };
    spec.ensure_valid()?;
    Ok(spec)
}

/// Team-optimal scalar gain for N = 1..n_max (xs = N, ys = gain, aux = exact
/// cost gap against the limit policy).
pub fn gain_curve_native(
    control: bool,
    r: f64,
    q: f64,
    d: f64,
    var_x: f64,
    var_z: f64,
    n_max: usize,
) -> mfteam::Result<Curve> {
    let spec = scalar_spec(control, r, q, d, var_x, var_z)?;
    let fp = FixedPointConfig::default();
    let gain = |n: Option<usize>| -> mfteam::Result<f64> {
        Ok(if control {
            match n {
                Some(n) => solver::solve_control_coupled_n(&spec, n, &fp)?,
                None => solver::solve_control_coupled_limit(&spec, &fp)?,
            }
            .policy()
            .gain[(0, 0)]
        } else {
            match n {
                Some(n) => solver::solve_state_coupled_n(&spec, n)?,
                None => solver::solve_state_coupled_limit(&spec)?,
            }
            .gain[(0, 0)]
        })
    };
    let limit = gain(None)?;
    let inf = Policy::from(mfteam::LinearPolicy::scalar(limit));
    let mut curve = Curve { limit, ..Curve::default() };
    for n in schedule(n_max.max(1)) {
        let g = gain(Some(n))?;
        let opt = Policy::from(mfteam::LinearPolicy::scalar(g));
        let gap = exact_cost(&spec, n, std::slice::from_ref(&inf))? - exact_cost(&spec, n, &[opt])?;
        curve.xs.push(n as f64);
        curve.ys.push(g);
        curve.aux.push(gap.abs());
    }
    Ok(curve)
}

/// Finite-horizon value `k_T^0` for T = 1..t_max (ys) and the exact average
/// cost gap of the stationary gain (aux). `limit` is `K`.
pub fn riccati_curve_native(a: f64, b: f64, q: f64, r: f64, t_max: usize) -> mfteam::Result<Curve> {
    let spec = DynamicLQGSpec::scalar(a, b, q, r, 1.0, 1.0);
    spec.ensure_valid()?;
    let inf = riccati::infinite_horizon_lqr(&spec, &RiccatiConfig::default())?;
    let t_max = t_max.max(1);
    let fin = riccati::finite_horizon_lqr(&spec, t_max)?;
    let mut curve = Curve { limit: inf.k[(0, 0)], ..Curve::default() };
    for t in 1..=t_max {
        curve.xs.push(t as f64);
        // k_T^0 for horizon T is k_{t_max}^{t_max − T}.
        curve.ys.push(fin.k_seq[t_max - t][(0, 0)]);
        curve.aux.push(riccati::horizon_gap(&spec, t, &inf)?.cost_gap);
    }
    Ok(curve)
}

/// Monte Carlo policy gap `E[max_i |γ_N(v^i) − γ_∞(v^i)|]` for a state-coupled
/// team over a log-spaced N schedule (ys = mean, aux = standard error).
pub fn policy_gap_curve_native(
    r: f64,
    q: f64,
    var_x: f64,
    var_z: f64,
    n_max: usize,
    samples: usize,
    seed: u64,
) -> mfteam::Result<Curve> {
    let spec = scalar_spec(false, r, q, 0.0, var_x, var_z)?;
    let inf: Policy = solver::solve_state_coupled_limit(&spec)?.into();
    let mc = MCConfig::new(samples.max(1), seed);
    let mut curve = Curve { limit: 0.0, ..Curve::default() };
    for n in schedule(n_max.max(1)).into_iter().step_by(4) {
        let pn: Policy = solver::solve_state_coupled_n(&spec, n)?.into();
        let gap = policy_gap_sup(&spec, &pn, &inf, n, &mc)?;
        curve.xs.push(n as f64);
        curve.ys.push(gap.mean);
        curve.aux.push(gap.se);
    }
    Ok(curve)
}

#[wasm_bindgen]
pub fn gain_curve(
    control: bool,
    r: f64,
    q: f64,
    d: f64,
    var_x: f64,
    var_z: f64,
    n_max: usize,
) -> Result<Curve, JsError> {
    gain_curve_native(control, r, q, d, var_x, var_z, n_max).map_err(js_err)
}

#[wasm_bindgen]
pub fn riccati_curve(a: f64, b: f64, q: f64, r: f64, t_max: usize) -> Result<Curve, JsError> {
    riccati_curve_native(a, b, q, r, t_max).map_err(js_err)
}

#[wasm_bindgen]
pub fn policy_gap_curve(
    r: f64,
    q: f64,
    var_x: f64,
    var_z: f64,
    n_max: usize,
    samples: usize,
    seed: u64,
) -> Result<Curve, JsError> {
    policy_gap_curve_native(r, q, var_x, var_z, n_max, samples, seed).map_err(js_err)
}
