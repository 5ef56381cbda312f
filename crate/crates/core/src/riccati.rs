//! Classical LQG control by static reduction: the backward Riccati recursion,
//! its infinite-horizon fixed point and exact average costs.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::DynamicLQGSpec;
use crate::rng;

/// Largest horizon accepted by [`zeta_trace_cost`]; the expansion is O(T²).
pub const ZETA_MAX_HORIZON: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Controllability {
    pub controllable: bool,
    pub rank: usize,
}

/// Rank test on `[B, AB, …, A^{n−1}B]`.
pub fn controllability_check(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Controllability> {
    let n = a.nrows();
    if !linalg::is_square(a) || b.nrows() != n {
        return Err(Error::Shape("A must be n×n and B n×m".into()));
    }
    let m = b.ncols();
    let mut ctrb = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        ctrb.view_mut((0, k * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    let rank = linalg::rank(&ctrb);
    Ok(Controllability { controllable: rank == n, rank })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiccatiSolution {
    /// `k_T^t` for `t = 0..=T`, with `k_T^T = 0`.
    #[serde(with = "crate::matrix_serde::vec")]
    pub k_seq: Vec<DMatrix<f64>>,
    /// `G_T^t` for `t = 0..T`.
    #[serde(with = "crate::matrix_serde::vec")]
    pub g_seq: Vec<DMatrix<f64>>,
    #[serde(with = "crate::matrix_serde")]
    pub k_inf: DMatrix<f64>,
    #[serde(with = "crate::matrix_serde")]
    pub g_inf: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteHorizon {
    pub k_seq: Vec<DMatrix<f64>>,
    pub g_seq: Vec<DMatrix<f64>>,
}

/// `(R + Bᵀ k B)⁻¹ Bᵀ k A`, negated to give the feedback gain.
fn gain(spec: &DynamicLQGSpec, k: &DMatrix<f64>, beta: f64) -> Result<DMatrix<f64>> {
    let btk = spec.b.transpose() * k * beta;
    let lhs = &spec.r + &btk * &spec.b;
    Ok(-linalg::solve_pd(&lhs, &(btk * &spec.a), "R + BᵀkB")?)
}

/// One discounted Riccati step `Q + βAᵀkA − β²AᵀkB(R + βBᵀkB)⁻¹BᵀkA`.
/// Returns the new value matrix and the gain built from `k`.
fn step(spec: &DynamicLQGSpec, k: &DMatrix<f64>, beta: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let g = gain(spec, k, beta)?;
    let atk = spec.a.transpose() * k * beta;
    let next = &spec.q + &atk * &spec.a + &atk * &spec.b * &g;
    // Rounding can leave the update slightly asymmetric.
    Ok(((&next + next.transpose()) * 0.5, g))
}

/// The value map evaluated at `k`.
pub fn riccati_map(spec: &DynamicLQGSpec, k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(step(spec, k, 1.0)?.0)
}

pub fn finite_horizon_lqr(spec: &DynamicLQGSpec, horizon: usize) -> Result<FiniteHorizon> {
    spec.ensure_valid()?;
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon T must be ≥ 1".into()));
    }
    let n = spec.state_dim();
    let mut k_seq = vec![DMatrix::zeros(n, n); horizon + 1];
    let mut g_seq = vec![DMatrix::zeros(spec.input_dim(), n); horizon];
    for t in (0..horizon).rev() {
        let (k, g) = step(spec, &k_seq[t + 1], 1.0)?;
        k_seq[t] = k;
        g_seq[t] = g;
    }
    Ok(FiniteHorizon { k_seq, g_seq })
}

/// Checks `k_{T+1}^t = k_T^{t−1}` bitwise for `t = 1..=T+1`.
pub fn shift_identity_holds(spec: &DynamicLQGSpec, horizon: usize) -> Result<bool> {
    let short = finite_horizon_lqr(spec, horizon)?;
    let long = finite_horizon_lqr(spec, horizon + 1)?;
    Ok((1..=horizon + 1).all(|t| long.k_seq[t] == short.k_seq[t - 1]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiccatiConfig {
    /// Stop when `‖k_{j+1} − k_j‖_F ≤ tol · max(1, ‖k_j‖_F)`. The scale factor
    /// keeps the test above roundoff when `K` is large.
    pub tol: f64,
    pub max_iter: usize,
    /// Also solve the discounted equations for β ∈ {0.9, 0.99, 0.999}.
    pub homotopy: bool,
}

impl Default for RiccatiConfig {
    fn default() -> Self {
        RiccatiConfig { tol: 1e-12, max_iter: 100_000, homotopy: false }
    }
}

pub const HOMOTOPY_BETAS: [f64; 3] = [0.9, 0.99, 0.999];

#[derive(Debug, Clone, PartialEq)]
pub struct InfiniteHorizon {
    pub k: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub iterations: usize,
    /// Frobenius norm of `riccati_map(K) − K`.
    pub residual: f64,
    pub closed_loop_radius: f64,
    /// `closed_loop_radius < 1`. Fails only when `Q` leaves unstable modes
    /// unpenalised (e.g. `Q = 0`, where `G_∞ = 0`).
    pub stable: bool,
    /// `(β, ‖C_β − K‖_F)` when the homotopy check ran.
    pub homotopy: Vec<(f64, f64)>,
}

fn value_iteration(spec: &DynamicLQGSpec, beta: f64, cfg: &RiccatiConfig) -> Result<(DMatrix<f64>, usize, f64)> {
    let n = spec.state_dim();
    let mut k = DMatrix::zeros(n, n);
    for it in 1..=cfg.max_iter {
        let next = step(spec, &k, beta)?.0;
        let residual = (&next - &k).norm();
        k = next;
        if !residual.is_finite() {
            return Err(Error::NonConvergence { iterations: it, residual });
        }
        if residual <= cfg.tol * k.norm().max(1.0) {
            return Ok((k, it, residual));
        }
    }
    let residual = (step(spec, &k, beta)?.0 - &k).norm();
    Err(Error::NonConvergence { iterations: cfg.max_iter, residual })
}

/// Value iteration from `k = 0` to the fixed point `K` and `G_∞`.
pub fn infinite_horizon_lqr(spec: &DynamicLQGSpec, cfg: &RiccatiConfig) -> Result<InfiniteHorizon> {
    spec.ensure_valid()?;
    if !(cfg.tol > 0.0) || cfg.max_iter == 0 {
        return Err(Error::InvalidArgument("tol must be > 0 and max_iter ≥ 1".into()));
    }
    let ctrb = controllability_check(&spec.a, &spec.b)?;
    if !ctrb.controllable {
        return Err(Error::NotControllable { rank: ctrb.rank, n: spec.state_dim() });
    }
    let (k, iterations, _) = value_iteration(spec, 1.0, cfg)?;
    let residual = (riccati_map(spec, &k)? - &k).norm();
    let g = gain(spec, &k, 1.0)?;
    let closed_loop_radius = linalg::spectral_radius(&(&spec.a + &spec.b * &g));
    let homotopy = if cfg.homotopy {
        HOMOTOPY_BETAS
            .iter()
            .map(|&beta| Ok((beta, (value_iteration(spec, beta, cfg)?.0 - &k).norm())))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    Ok(InfiniteHorizon { k, g, iterations, residual, closed_loop_radius, stable: closed_loop_radius < 1.0, homotopy })
}

/// Finite-horizon sequences together with the infinite-horizon fixed point.
pub fn solve(spec: &DynamicLQGSpec, horizon: usize, cfg: &RiccatiConfig) -> Result<RiccatiSolution> {
    let fin = finite_horizon_lqr(spec, horizon)?;
    let inf = infinite_horizon_lqr(spec, cfg)?;
    Ok(RiccatiSolution { k_seq: fin.k_seq, g_seq: fin.g_seq, k_inf: inf.k, g_inf: inf.g })
}

fn check_schedule(spec: &DynamicLQGSpec, horizon: usize, gains: &[DMatrix<f64>]) -> Result<()> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon T must be ≥ 1".into()));
    }
    if gains.len() != 1 && gains.len() != horizon {
        return Err(Error::Shape(format!("gain schedule has {} entries for horizon {horizon}", gains.len())));
    }
    let shape = (spec.input_dim(), spec.state_dim());
    if gains.iter().any(|g| g.shape() != shape) {
        return Err(Error::Shape(format!("gains must be {}×{}", shape.0, shape.1)));
    }
    Ok(())
}

fn schedule(gains: &[DMatrix<f64>], t: usize) -> &DMatrix<f64> {
    if gains.len() == 1 {
        &gains[0]
    } else {
        &gains[t]
    }
}

/// `J_T = (1/T) Σ_t Tr((Q + GᵗᵀRGᵗ) P_t)` with `P_{t+1} = (A+BGᵗ)P_t(A+BGᵗ)ᵀ + Σ_w`,
/// `P_0 = Σ_0`. `gains` holds one matrix per stage or a single stationary gain.
pub fn exact_average_cost(spec: &DynamicLQGSpec, horizon: usize, gains: &[DMatrix<f64>]) -> Result<f64> {
    check_schedule(spec, horizon, gains)?;
    let mut p = spec.sigma_0.clone();
    let mut total = 0.0;
    for t in 0..horizon {
        let g = schedule(gains, t);
        let stage = &spec.q + g.transpose() * &spec.r * g;
        total += (stage * &p).trace();
        let cl = &spec.a + &spec.b * g;
        p = &cl * p * cl.transpose() + &spec.sigma_w;
    }
    Ok(total / horizon as f64)
}

/// The same average cost through the static-reduction expansion
/// `x_t = Σ_{k≤t} L^{t,k} ζ_k`, `ζ_0 = x_0`, `ζ_k = w_{k−1}`, with
/// `L^{t,k} = (A+BG^{t−1})⋯(A+BG^k)`, summing `Tr(L^{t,k}ᵀ H^t L^{t,k} Σ_{ζ_k})`.
pub fn zeta_trace_cost(spec: &DynamicLQGSpec, horizon: usize, gains: &[DMatrix<f64>]) -> Result<f64> {
    check_schedule(spec, horizon, gains)?;
    if horizon > ZETA_MAX_HORIZON {
        return Err(Error::InvalidArgument(format!("trace expansion is limited to T ≤ {ZETA_MAX_HORIZON}")));
    }
    let n = spec.state_dim();
    let closed: Vec<DMatrix<f64>> = (0..horizon).map(|t| &spec.a + &spec.b * schedule(gains, t)).collect();
    let mut total = 0.0;
    for t in 0..horizon {
        let g = schedule(gains, t);
        let h = &spec.q + g.transpose() * &spec.r * g;
        for k in 0..=t {
            let mut l = linalg::identity(n);
            for c in &closed[k..t] {
                l = c * l;
            }
            let cov = if k == 0 { &spec.sigma_0 } else { &spec.sigma_w };
            total += (l.transpose() * &h * &l * cov).trace();
        }
    }
    Ok(total / horizon as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonGap {
    pub horizon: usize,
    /// `‖k_T^0 − K‖_F`.
    pub k_residual: f64,
    pub optimal_cost: f64,
    pub stationary_cost: f64,
    pub cost_gap: f64,
}

/// `|J_T(G_T^t) − J_T(G_∞)|`, evaluated exactly.
pub fn cost_gap_theorem64(spec: &DynamicLQGSpec, horizon: usize) -> Result<f64> {
    let inf = infinite_horizon_lqr(spec, &RiccatiConfig::default())?;
    Ok(horizon_gap(spec, horizon, &inf)?.cost_gap)
}

/// Horizon-`T` comparison against an already solved fixed point.
pub fn horizon_gap(spec: &DynamicLQGSpec, horizon: usize, inf: &InfiniteHorizon) -> Result<HorizonGap> {
    let fin = finite_horizon_lqr(spec, horizon)?;
    let optimal_cost = exact_average_cost(spec, horizon, &fin.g_seq)?;
    let stationary_cost = exact_average_cost(spec, horizon, std::slice::from_ref(&inf.g))?;
    Ok(HorizonGap {
        horizon,
        k_residual: (&fin.k_seq[0] - &inf.k).norm(),
        optimal_cost,
        stationary_cost,
        cost_gap: (optimal_cost - stationary_cost).abs(),
    })
}

/// Monte Carlo average cost of the controlled chain: mean and standard error
/// over `samples` independent trajectories.
pub fn simulate_average_cost(
    spec: &DynamicLQGSpec,
    horizon: usize,
    gains: &[DMatrix<f64>],
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check_schedule(spec, horizon, gains)?;
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two trajectories".into()));
    }
    let f0 = linalg::psd_factor(&spec.sigma_0);
    let fw = linalg::psd_factor(&spec.sigma_w);
    let n = spec.state_dim();
    let path = |i: usize| {
        let mut r = rng::stream(seed, i as u64);
        let mut normal = |f: &DMatrix<f64>| {
            let e = nalgebra::DVector::from_fn(n, |_, _| StandardNormal.sample(&mut r));
            f * e
        };
        let mut x = normal(&f0);
        let mut cost = 0.0;
        for t in 0..horizon {
            let u = schedule(gains, t) * &x;
            cost += x.dot(&(&spec.q * &x)) + u.dot(&(&spec.r * &u));
            x = &spec.a * &x + &spec.b * u + normal(&fw);
        }
        cost / horizon as f64
    };
    let costs = crate::mc::par_map(samples, path);
    Ok(crate::mc::mean_se(&costs))
}
