//! Report types and their CSV / JSON renderings.
//!
//! Numbers are written with Rust's shortest round-trip float formatting, so
//! identical inputs give byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{PolicyGap, UiStat, WeakConvergence};
use crate::error::{Error, Result};
use crate::mc::StationarityResidual;
use crate::riccati::HorizonGap;

pub const CONVERGENCE_HEADER: &str = "N,policy_gap,cost_gap,cost_gap_ci,ui_stat";
pub const HORIZON_HEADER: &str = "T,k_residual,cost_gap";
pub const ASYMMETRIC_HEADER: &str = "N,asymmetric_term,asymmetric_term_times_n";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub ns: Vec<usize>,
    pub policy_gap: Vec<f64>,
    pub cost_gap: Vec<f64>,
    pub cost_gap_ci: Vec<f64>,
    pub ui_stat: Vec<f64>,
}

impl ConvergenceReport {
    pub fn push(&mut self, n: usize, policy_gap: f64, cost_gap: f64, cost_gap_ci: f64, ui_stat: f64) {
        self.ns.push(n);
        self.policy_gap.push(policy_gap);
        self.cost_gap.push(cost_gap);
        self.cost_gap_ci.push(cost_gap_ci);
        self.ui_stat.push(ui_stat);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CONVERGENCE_HEADER);
        out.push('\n');
        for i in 0..self.ns.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                self.ns[i], self.policy_gap[i], self.cost_gap[i], self.cost_gap_ci[i], self.ui_stat[i]
            );
        }
        out
    }
}

pub fn horizon_csv(rows: &[HorizonGap]) -> String {
    let mut out = String::from(HORIZON_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.horizon, r.k_residual, r.cost_gap);
    }
    out
}

pub fn asymmetric_csv(rows: &[(usize, f64)]) -> String {
    let mut out = String::from(ASYMMETRIC_HEADER);
    out.push('\n');
    for &(n, t) in rows {
        let _ = writeln!(out, "{n},{t},{}", t * n as f64);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.to_string(), passed, detail: detail.into() }
    }
}

/// Solver output at one N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticRow {
    pub n: usize,
    /// Gain of `γ_N` (or its scale on `E[x|v]` for nonlinear rules).
    #[serde(with = "crate::matrix_serde")]
    pub gain_n: DMatrix<f64>,
    #[serde(with = "crate::matrix_serde")]
    pub gain_inf: DMatrix<f64>,
    pub policy_gap: PolicyGap,
    pub cost_n: f64,
    pub cost_inf: f64,
    pub cost_gap: f64,
    pub cost_gap_ci: f64,
    pub ui_stat: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_point_discrepancy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asymmetric_term: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityRecord {
    pub n: usize,
    pub residuals: Vec<StationarityResidual>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SuiteData {
    Static {
        convergence: ConvergenceReport,
        rows: Vec<StaticRow>,
        ui: UiStat,
        #[serde(default)]
        stationarity: Vec<StationarityRecord>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weak_convergence: Option<WeakConvergence>,
    },
    Lqg {
        rows: Vec<HorizonGap>,
        #[serde(with = "crate::matrix_serde")]
        k_inf: DMatrix<f64>,
        #[serde(with = "crate::matrix_serde")]
        g_inf: DMatrix<f64>,
        closed_loop_radius: f64,
        homotopy: Vec<(f64, f64)>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        simulated_cost: Option<(f64, f64)>,
    },
}

/// Run description, kept apart from the data so the data block is stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub suite: String,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub metadata: Metadata,
    pub checks: Vec<Check>,
    pub data: SuiteData,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is serialisable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("report: {e}")))
    }

    /// The primary CSV table.
    pub fn csv(&self) -> String {
        match &self.data {
            SuiteData::Static { convergence, .. } => convergence.to_csv(),
            SuiteData::Lqg { rows, .. } => horizon_csv(rows),
        }
    }

    /// Extra tables as `(file suffix, contents)`.
    pub fn side_tables(&self) -> Vec<(String, String)> {
        match &self.data {
            SuiteData::Static { rows, .. } => {
                let asym: Vec<(usize, f64)> = rows.iter().filter_map(|r| r.asymmetric_term.map(|t| (r.n, t))).collect();
                if asym.is_empty() {
                    Vec::new()
                } else {
                    vec![("asymmetric".into(), asymmetric_csv(&asym))]
                }
            }
            SuiteData::Lqg { .. } => Vec::new(),
        }
    }

    /// Writes `<suite>.csv`, `<suite>.json` and any side tables into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| Error::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let stem = &self.metadata.suite;
        let mut files =
            vec![(dir.join(format!("{stem}.csv")), self.csv()), (dir.join(format!("{stem}.json")), self.to_json())];
        for (suffix, text) in self.side_tables() {
            files.push((dir.join(format!("{stem}_{suffix}.csv")), text));
        }
        for (path, text) in &files {
            std::fs::write(path, text).map_err(io(path))?;
        }
        Ok(files.into_iter().map(|f| f.0).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_is_exact() {
        let mut r = ConvergenceReport::default();
        r.push(10, 0.1, 0.01, 0.0, 2.5);
        let csv = r.to_csv();
        assert_eq!(csv.lines().next().unwrap(), "N,policy_gap,cost_gap,cost_gap_ci,ui_stat");
        assert_eq!(csv.lines().nth(1).unwrap(), "10,0.1,0.01,0,2.5");
    }

    #[test]
    fn json_roundtrip_is_lossless() {
        let mut convergence = ConvergenceReport::default();
        convergence.push(10, 0.1 + 0.2, 1.0 / 3.0, 1e-300, f64::MIN_POSITIVE);
        let report = SuiteReport {
            metadata: Metadata {
                suite: "ex1_state_coupled".into(),
                seed: Some(1),
                samples: Some(10),
                version: "0".into(),
            },
            checks: vec![Check::new("x", true, "ok")],
            data: SuiteData::Static {
                convergence,
                rows: Vec::new(),
                ui: crate::diagnostics::ui_summary(&[10], vec![2.0]),
                stationarity: Vec::new(),
                weak_convergence: None,
            },
        };
        assert_eq!(SuiteReport::from_json(&report.to_json()).unwrap(), report);
    }
}
