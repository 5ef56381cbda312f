//! Named experiment suites. Each suite solves its instance along a schedule of
//! N (or T), computes the convergence diagnostics and evaluates its checks.

use nalgebra::DMatrix;

use crate::config::{ExperimentConfig, LqgConfig, StaticConfig, Suite};
use crate::cost::asymmetric_term;
use crate::diagnostics::{self, cost_gap, policy_gap_sup, ui_moment, ui_summary, Evaluator};
use crate::error::Result;
use crate::linalg;
use crate::mc::{self, MCConfig, StationarityConfig};
use crate::model::Policy;
use crate::report::{Check, ConvergenceReport, Metadata, StaticRow, StationarityRecord, SuiteData, SuiteReport};
use crate::riccati;
use crate::solver;

/// Largest z-score accepted by the stationarity check.
pub const STATIONARITY_Z: f64 = 5.0;
/// Largest log-log growth slope accepted for the uniform-integrability
/// statistic over the last two N. The statistic may rise at small N (the
/// shared-state moments saturate from below), so only the tail is judged.
pub const UI_SLOPE_MAX: f64 = 0.05;
/// Required band for the weak-convergence slope.
pub const WEAK_SLOPE: (f64, f64) = (-0.65, -0.35);
/// Agreement required between iterated and direct fixed points.
pub const FIXED_POINT_TOL: f64 = 1e-10;

pub fn run_suite(config: &ExperimentConfig) -> Result<SuiteReport> {
    config.validate()?;
    match config {
        ExperimentConfig::Static(c) => run_static(c),
        ExperimentConfig::Lqg(c) => run_lqg(c),
    }
}

fn metadata(suite: Suite, mc: Option<&MCConfig>) -> Metadata {
    Metadata {
        suite: suite.name().to_string(),
        seed: mc.map(|m| m.seed),
        samples: mc.map(|m| m.samples),
        version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(", ")
}

struct Solved {
    policy_n: Policy,
    gain_n: DMatrix<f64>,
    iterations: Option<usize>,
    discrepancy: Option<f64>,
}

fn solve_static(c: &StaticConfig, n: Option<usize>) -> Result<Solved> {
    match c.suite {
        Suite::Ex1StateCoupled | Suite::Ex2Nongaussian => {
            let policy = solver::state_coupled_policy(&c.spec, n)?;
            let gain_n = match &policy {
                Policy::Linear(p) => p.gain.clone(),
                Policy::Estimator { scale, .. } => scale.clone(),
            };
            Ok(Solved { policy_n: policy, gain_n, iterations: None, discrepancy: None })
        }
        _ => {
            let res = match n {
                Some(n) => solver::solve_control_coupled_n(&c.spec, n, &c.solver)?,
                None => solver::solve_control_coupled_limit(&c.spec, &c.solver)?,
            };
            Ok(Solved {
                policy_n: res.policy().clone().into(),
                gain_n: res.policy().gain.clone(),
                iterations: Some(res.iterations),
                discrepancy: Some(res.discrepancy),
            })
        }
    }
}

fn run_static(c: &StaticConfig) -> Result<SuiteReport> {
    let limit = solve_static(c, None)?;
    let exact = c.suite != Suite::Ex2Nongaussian;
    let evaluator = if exact { Evaluator::Exact } else { Evaluator::MonteCarlo(c.mc) };
    let inf_profile = [limit.policy_n.clone()];

    let mut convergence = ConvergenceReport::default();
    let mut rows = Vec::with_capacity(c.ns.len());
    let mut ui_values = Vec::with_capacity(c.ns.len());
    for &n in &c.ns {
        let solved = solve_static(c, Some(n))?;
        let pg = policy_gap_sup(&c.spec, &solved.policy_n, &limit.policy_n, n, &c.mc)?;
        let cg = cost_gap(&c.spec, n, std::slice::from_ref(&solved.policy_n), &inf_profile, &evaluator)?;
        let ui = ui_moment(&c.spec, n, &inf_profile, c.ui_epsilon, &c.mc)?;
        let asym = match &c.asymmetric {
            Some(a) => Some(asymmetric_term(&c.spec, n, &solved.policy_n, &a.weights)?),
            None => None,
        };
        convergence.push(n, pg.mean, cg.gap, cg.ci, ui);
        ui_values.push(ui);
        rows.push(StaticRow {
            n,
            gain_n: solved.gain_n,
            gain_inf: limit.gain_n.clone(),
            policy_gap: pg,
            cost_n: cg.cost_n,
            cost_inf: cg.cost_inf,
            cost_gap: cg.gap,
            cost_gap_ci: cg.ci,
            ui_stat: ui,
            iterations: solved.iterations,
            fixed_point_discrepancy: solved.discrepancy,
            asymmetric_term: asym,
        });
    }
    let ui = ui_summary(&c.ns, ui_values);

    let mut stationarity = Vec::new();
    if let Some(s) = &c.stationarity {
        let mc = MCConfig { samples: s.samples, ..c.mc };
        let cfg = StationarityConfig { fd_step: s.fd_step, inner_samples: s.inner_samples };
        for &n in &s.ns {
            let policy = solve_static(c, Some(n))?.policy_n;
            let residuals = mc::stationarity_residual(&c.spec, n, &[policy], &mc, &cfg)?;
            stationarity.push(StationarityRecord { n, residuals });
        }
    }
    let weak = match &c.weak_convergence {
        Some(w) => Some(diagnostics::weak_convergence_curve(
            &c.spec,
            &limit.policy_n,
            &w.ns,
            w.replicates,
            w.reference_draws,
            c.mc.seed,
        )?),
        None => None,
    };

    let checks = static_checks(c, &rows, &convergence, &ui, &stationarity, weak.as_ref());
    Ok(SuiteReport {
        metadata: metadata(c.suite, Some(&c.mc)),
        checks,
        data: SuiteData::Static { convergence, rows, ui, stationarity, weak_convergence: weak },
    })
}

fn static_checks(
    c: &StaticConfig,
    rows: &[StaticRow],
    conv: &ConvergenceReport,
    ui: &diagnostics::UiStat,
    stationarity: &[StationarityRecord],
    weak: Option<&diagnostics::WeakConvergence>,
) -> Vec<Check> {
    let mut checks = Vec::new();
    if rows.len() > 1 {
        checks.push(Check::new(
            "policy_gap_decreasing",
            strictly_decreasing(&conv.policy_gap),
            fmt_list(&conv.policy_gap),
        ));
        let gain_gaps: Vec<f64> = rows.iter().map(|r| linalg::sup_norm(&(&r.gain_n - &r.gain_inf))).collect();
        match c.suite {
            Suite::Ex1StateCoupled | Suite::Ex2Nongaussian => {
                let scaled: Vec<f64> = rows.iter().zip(&gain_gaps).map(|(r, g)| g * r.n as f64).collect();
                let spread = scaled.iter().map(|s| (s - scaled[0]).abs()).fold(0.0, f64::max);
                checks.push(Check::new(
                    "gain_gap_times_n_constant",
                    spread <= 1e-12 * scaled[0].abs().max(1.0),
                    format!("N·|γ_N − γ_∞| = {} (spread {spread:.2e})", fmt_list(&scaled)),
                ));
            }
            _ => {
                checks.push(Check::new("gain_gap_decreasing", strictly_decreasing(&gain_gaps), fmt_list(&gain_gaps)));
            }
        }
        match c.suite {
            Suite::Ex1StateCoupled => {
                let scaled: Vec<f64> = rows.iter().map(|r| r.cost_gap * (r.n * r.n) as f64).collect();
                let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = scaled.iter().copied().fold(0.0, f64::max);
                checks.push(Check::new(
                    "cost_gap_quadratic_band",
                    lo > 0.0 && hi <= 2.0 * lo,
                    format!("N²·gap = {}", fmt_list(&scaled)),
                ));
            }
            Suite::Ex2Nongaussian => {
                // Monte Carlo gaps: the last gap may not exceed the first beyond the joint CI.
                let (first, last) = (&rows[0], &rows[rows.len() - 1]);
                checks.push(Check::new(
                    "cost_gap_not_increasing",
                    last.cost_gap <= first.cost_gap + first.cost_gap_ci + last.cost_gap_ci,
                    format!("gaps {} ± {}", fmt_list(&conv.cost_gap), fmt_list(&conv.cost_gap_ci)),
                ));
            }
            _ => {
                checks.push(Check::new(
                    "cost_gap_decreasing",
                    strictly_decreasing(&conv.cost_gap),
                    fmt_list(&conv.cost_gap),
                ));
            }
        }
        let k = ui.values.len();
        let tail = linalg::log_log_slope(&[ui.ns[k - 2] as f64, ui.ns[k - 1] as f64], &ui.values[k - 2..]);
        checks.push(Check::new(
            "ui_stat_bounded",
            tail <= UI_SLOPE_MAX,
            format!("tail log-log slope {tail:.4}, sup {:.4e} (values {})", ui.sup, fmt_list(&ui.values)),
        ));
    }
    if let Some(worst) = rows.iter().filter_map(|r| r.fixed_point_discrepancy).reduce(f64::max) {
        checks.push(Check::new(
            "fixed_point_consistent",
            worst <= FIXED_POINT_TOL,
            format!("max |iterated − direct| = {worst:.2e}"),
        ));
    }
    if c.suite == Suite::Ex4Asymmetric && rows.len() > 1 {
        let terms: Vec<f64> = rows.iter().filter_map(|r| r.asymmetric_term).collect();
        let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
        let slope = linalg::log_log_slope(&xs, &terms);
        checks.push(Check::new(
            "asymmetric_term_vanishes",
            slope <= -0.95,
            format!("log-log slope {slope:.4} (terms {})", fmt_list(&terms)),
        ));
    }
    if !stationarity.is_empty() {
        let worst = stationarity.iter().flat_map(|s| s.residuals.iter()).map(|r| r.z).fold(0.0, f64::max);
        checks.push(Check::new(
            "stationarity",
            worst <= STATIONARITY_Z,
            format!("max z = {worst:.3} over N = {:?}", stationarity.iter().map(|s| s.n).collect::<Vec<_>>()),
        ));
    }
    if let Some(w) = weak {
        checks.push(Check::new(
            "weak_convergence_rate",
            w.slope >= WEAK_SLOPE.0 && w.slope <= WEAK_SLOPE.1,
            format!("log-log slope {:.4} (gaps {})", w.slope, fmt_list(&w.mean_gap)),
        ));
    }
    checks
}

fn run_lqg(c: &LqgConfig) -> Result<SuiteReport> {
    let inf = riccati::infinite_horizon_lqr(&c.spec, &c.riccati)?;
    let mut rows = Vec::with_capacity(c.ts.len());
    let mut k0 = Vec::with_capacity(c.ts.len());
    let mut shift_ok = true;
    for &t in &c.ts {
        rows.push(riccati::horizon_gap(&c.spec, t, &inf)?);
        k0.push(riccati::finite_horizon_lqr(&c.spec, t)?.k_seq.swap_remove(0));
        shift_ok &= riccati::shift_identity_holds(&c.spec, t)?;
    }
    let simulated = match &c.mc {
        Some(mc) => {
            Some(riccati::simulate_average_cost(&c.spec, c.ts[0], std::slice::from_ref(&inf.g), mc.samples, mc.seed)?)
        }
        None => None,
    };

    let mut checks = vec![
        Check::new(
            "riccati_fixed_point",
            inf.residual <= c.riccati.tol * inf.k.norm().max(1.0),
            format!("‖Ric(K) − K‖_F = {:.2e}", inf.residual),
        ),
        Check::new("closed_loop_stable", inf.stable, format!("ρ(A + BG_∞) = {:.6}", inf.closed_loop_radius)),
        Check::new("shift_identity", shift_ok, "k_{T+1}^t = k_T^{t−1} bitwise"),
    ];
    let monotone = k0.windows(2).all(|w| linalg::min_eigenvalue(&(&w[1] - &w[0])) >= -1e-12)
        && k0.iter().all(|k| linalg::min_eigenvalue(&(&inf.k - k)) >= -1e-9);
    checks.push(Check::new("value_monotone", monotone, "k_T^0 nondecreasing in T and ≤ K"));
    let res: Vec<f64> = rows.iter().map(|r| r.k_residual).collect();
    checks.push(Check::new("k_residual_nonincreasing", res.windows(2).all(|w| w[1] <= w[0]), fmt_list(&res)));
    let gaps: Vec<f64> = rows.iter().map(|r| r.cost_gap).collect();
    let mut halving = Vec::new();
    for w in rows.windows(2) {
        if w[1].horizon == 2 * w[0].horizon && w[0].cost_gap > 0.0 {
            halving.push(w[1].cost_gap / w[0].cost_gap);
        }
    }
    checks.push(Check::new(
        "cost_gap_halves",
        halving.iter().all(|r| (r - 0.5).abs() <= 0.1),
        format!("gaps {} ; doubling ratios {}", fmt_list(&gaps), fmt_list(&halving)),
    ));
    let t_small = c.ts[0].min(riccati::ZETA_MAX_HORIZON);
    let fin = riccati::finite_horizon_lqr(&c.spec, t_small)?;
    let a = riccati::exact_average_cost(&c.spec, t_small, &fin.g_seq)?;
    let b = riccati::zeta_trace_cost(&c.spec, t_small, &fin.g_seq)?;
    checks.push(Check::new(
        "zeta_trace_identity",
        (a - b).abs() <= 1e-10 * a.abs().max(1.0),
        format!("T = {t_small}: {a} vs {b}"),
    ));
    if let Some((mean, se)) = simulated {
        let exact = rows[0].stationary_cost;
        checks.push(Check::new(
            "simulation_agrees",
            (mean - exact).abs() <= 5.0 * se,
            format!("T = {}: exact {exact:.6}, simulated {mean:.6} ± {se:.2e}", c.ts[0]),
        ));
    }
    if c.riccati.homotopy {
        let d: Vec<f64> = inf.homotopy.iter().map(|h| h.1).collect();
        checks.push(Check::new(
            "discount_homotopy",
            d.windows(2).all(|w| w[1] < w[0]),
            format!("‖C_β − K‖_F = {}", fmt_list(&d)),
        ));
    }
    Ok(SuiteReport {
        metadata: metadata(c.suite, c.mc.as_ref()),
        checks,
        data: SuiteData::Lqg {
            rows,
            k_inf: inf.k,
            g_inf: inf.g,
            closed_loop_radius: inf.closed_loop_radius,
            homotopy: inf.homotopy,
            simulated_cost: simulated,
        },
    })
}
