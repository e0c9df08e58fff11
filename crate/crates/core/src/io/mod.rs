//! Channel spec and run config files, command drivers, and report writers.
//!
//! Both input files are TOML. A channel spec:
//!
//! ```toml
//! label = "scalar"
//! t = 1
//! S = [2.0]
//! N1 = [1.0]
//! N2 = [2.0]
//! N3 = [3.0]
//! ```
//!
//! Matrices are row-major with `t²` entries.

mod commands;
mod report;

pub use commands::{run_oracle, run_region, run_verify, Exit, OracleArgs, RunArgs};
pub use report::{fmt_sig, BoundaryRecord, PointRecord, VerificationRecord};

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::channel::Sadbc;
use crate::enhancement::Tolerances;
use crate::error::{Error, Result};
use crate::matrix::SymMatrix;
use crate::solver::SolveOptions;

/// Largest entry-wise asymmetry accepted in a spec, relative to the matrix size.
pub const SPEC_SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpecFile {
    #[serde(default)]
    pub label: Option<String>,
    pub t: usize,
    #[serde(rename = "S")]
    pub s: Vec<f64>,
    #[serde(rename = "N1")]
    pub n1: Vec<f64>,
    #[serde(rename = "N2")]
    pub n2: Vec<f64>,
    #[serde(rename = "N3")]
    pub n3: Vec<f64>,
}

impl ChannelSpecFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidInput(format!("channel spec: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read(path)?)
    }

    /// Check shapes and symmetry, then validate the channel conditions.
    pub fn to_channel(&self, tol: f64) -> Result<Sadbc> {
        let t = self.t;
        if t == 0 {
            return Err(Error::InvalidInput("channel spec: t must be at least 1".into()));
        }
        let mut mats = Vec::with_capacity(4);
        for (name, v) in [("S", &self.s), ("N1", &self.n1), ("N2", &self.n2), ("N3", &self.n3)] {
            if v.len() != t * t {
                return Err(Error::InvalidInput(format!(
                    "channel spec: {name} has {} entries, expected {}",
                    v.len(),
                    t * t
                )));
            }
            let top = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            for i in 0..t {
                for j in (i + 1)..t {
                    let gap = (v[i * t + j] - v[j * t + i]).abs();
                    if gap > SPEC_SYMMETRY_TOL * (1.0 + top) {
                        return Err(Error::InvalidInput(format!(
                            "channel spec: {name} is not symmetric at ({i}, {j}), gap {gap:e}"
                        )));
                    }
                }
            }
            mats.push(SymMatrix::from_row_major(t, v)?);
        }
        let n3 = mats.pop().expect("four matrices");
        let n2 = mats.pop().expect("four matrices");
        let n1 = mats.pop().expect("four matrices");
        let s = mats.pop().expect("four matrices");
        Sadbc::validate(t, s, n1, n2, n3, tol)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub max_iters: usize,
    pub step_init: f64,
    pub armijo_c: f64,
    pub restarts: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolveOptions::default();
        Self { max_iters: d.max_iters, step_init: d.step_init, armijo_c: d.armijo_c, restarts: d.restarts }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceSection {
    pub kkt_tol: f64,
    pub feas_tol: f64,
    pub verify_tol: f64,
    pub rate_tol: f64,
}

impl Default for ToleranceSection {
    fn default() -> Self {
        let t = Tolerances::default();
        Self { kkt_tol: SolveOptions::default().kkt_tol, feas_tol: t.feas_tol, verify_tol: t.verify_tol, rate_tol: t.rate_tol }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mu_grid: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub tolerances: ToleranceSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("sadbc-out")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::InvalidInput(format!("run config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu_grid.is_empty() {
            return Err(Error::InvalidInput("run config: mu_grid is empty".into()));
        }
        if let Some(bad) = self.mu_grid.iter().find(|m| !(m.is_finite() && **m >= 1.0)) {
            return Err(Error::InvalidInput(format!("run config: mu_grid entry {bad} is not a finite value ≥ 1")));
        }
        let t = &self.tolerances;
        if ![t.kkt_tol, t.feas_tol, t.verify_tol, t.rate_tol].iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::InvalidInput("run config: tolerances must be positive".into()));
        }
        self.solve_options().validate()
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            max_iters: self.solver.max_iters,
            step_init: self.solver.step_init,
            armijo_c: self.solver.armijo_c,
            restarts: self.solver.restarts,
            seed: self.seed,
            kkt_tol: self.tolerances.kkt_tol,
            feas_tol: self.tolerances.feas_tol,
            record_log: false,
        }
    }

    pub fn verify_tolerances(&self) -> Tolerances {
        Tolerances {
            feas_tol: self.tolerances.feas_tol,
            verify_tol: self.tolerances.verify_tol,
            rate_tol: self.tolerances.rate_tol,
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCALAR: &str = "label = \"scalar\"\nt = 1\nS = [2.0]\nN1 = [1.0]\nN2 = [2.0]\nN3 = [3.0]\n";

    #[test]
    fn parses_scalar_spec() {
        let spec = ChannelSpecFile::parse(SCALAR).unwrap();
        assert_eq!(spec.label.as_deref(), Some("scalar"));
        let ch = spec.to_channel(1e-8).unwrap();
        assert_eq!(ch.n3().get(0, 0), 3.0);
    }

    #[test]
    fn rejects_bad_specs() {
        let short = "t = 2\nS = [1.0, 0.0, 0.0]\nN1 = [1,0,0,1]\nN2 = [1,0,0,1]\nN3 = [1,0,0,1]\n";
        assert!(ChannelSpecFile::parse(short).is_err() || ChannelSpecFile::parse(short).unwrap().to_channel(1e-8).is_err());
        let asym = "t = 2\nS = [1.0, 0.5, 0.4, 1.0]\nN1 = [1.0,0,0,1]\nN2 = [1.0,0,0,1]\nN3 = [1.0,0,0,1]\n";
        let err = ChannelSpecFile::parse(asym).unwrap().to_channel(1e-8).unwrap_err();
        assert!(err.to_string().contains("not symmetric"));
        let misordered = "t = 1\nS = [1.0]\nN1 = [1.0]\nN2 = [3.0]\nN3 = [2.7]\n";
        let err = ChannelSpecFile::parse(misordered).unwrap().to_channel(1e-8).unwrap_err();
        assert!(err.to_string().contains("N2 ⪯ N3 fails"), "{err}");
        assert!(ChannelSpecFile::parse("t = 1\nS = [1.0]\n").is_err());
        assert!(ChannelSpecFile::parse(&format!("{SCALAR}extra = 1\n")).is_err());
    }

    #[test]
    fn config_defaults_and_rejections() {
        let cfg = RunConfig::parse("mu_grid = [1.5, 2, 3]\n").unwrap();
        assert_eq!(cfg.mu_grid, vec![1.5, 2.0, 3.0]);
        assert_eq!(cfg.solve_options(), SolveOptions::default());
        assert_eq!(cfg.verify_tolerances(), Tolerances::default());
        assert!(RunConfig::parse("mu_grid = []\n").is_err());
        assert!(RunConfig::parse("mu_grid = [0.5]\n").is_err());
        assert!(RunConfig::parse("mu_grid = [2.0]\n[tolerances]\nkkt_tol = -1.0\n").is_err());
        assert!(RunConfig::parse("mu_grid = [2.0]\n[solver]\nrestarts = 0\n").is_err());
        let cfg = RunConfig::parse("mu_grid = [2.0]\nseed = 9\noutput_dir = \"x\"\n[solver]\nrestarts = 3\n").unwrap();
        assert_eq!(cfg.solve_options().restarts, 3);
        assert_eq!(cfg.solve_options().seed, 9);
        assert_eq!(cfg.output_dir, PathBuf::from("x"));
    }
}
