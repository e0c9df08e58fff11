use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::enhancement::verify_enhancement;
use crate::error::{Error, Result};
use crate::solver::{oracle_dominance, maximize_weighted, trace_boundary, brute_force_visit, SolveOptions};

use super::report::{
    boundary_csv, fmt_sig, plot_script, BoundaryRecord, ChecksRecord, PointRecord, VerificationRecord,
    VerifyPointRecord,
};
use super::{ChannelSpecFile, RunConfig};

/// Oracle dominance is a verification: violations above this many bits exit 1.
pub const DOMINANCE_TOL_BITS: f64 = 1e-3;

/// Process exit status. Input and runtime errors map to [`Exit::InputError`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    VerificationFailed = 1,
    InputError = 2,
}

#[derive(Debug, Clone)]
pub struct RunArgs {
    pub spec: PathBuf,
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct OracleArgs {
    pub spec: PathBuf,
    pub step: f64,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

fn load(args: &RunArgs) -> Result<(ChannelSpecFile, RunConfig, PathBuf)> {
    let spec = ChannelSpecFile::load(&args.spec)?;
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let out = args.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    Ok((spec, cfg, out))
}

fn write(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::InvalidInput(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// `region`: trace the boundary and write `boundary.csv`, `certificates.json`, `plot.gp`.
pub fn run_region(args: &RunArgs) -> Result<Exit> {
    let (spec, cfg, out) = load(args)?;
    let ch = spec.to_channel(cfg.tolerances.feas_tol)?;
    let trace = trace_boundary(&ch, &cfg.mu_grid, &cfg.solve_options())?;

    let record = BoundaryRecord {
        label: spec.label.clone(),
        t: spec.t,
        seed: cfg.seed,
        mu_grid: cfg.mu_grid.clone(),
        points: trace.sorted_by_r1().into_iter().map(PointRecord::from_point).collect(),
        envelope: trace.envelope.iter().map(|&(x, y)| [x, y]).collect(),
    };
    let csv = write(&out, "boundary.csv", &boundary_csv(&trace))?;
    write(&out, "certificates.json", &to_json(&record)?)?;
    write(&out, "plot.gp", &plot_script(spec.label.as_deref()))?;

    let uncertified = record.points.iter().filter(|p| p.status != "certified").count();
    println!(
        "wrote {} ({} points, {} not certified)",
        csv.display(),
        record.points.len(),
        uncertified
    );
    Ok(Exit::Success)
}

/// `verify`: solve every `μ > 1`, construct the enhanced channel and run the checks.
pub fn run_verify(args: &RunArgs) -> Result<Exit> {
    let (spec, cfg, out) = load(args)?;
    let ch = spec.to_channel(cfg.tolerances.feas_tol)?;
    let opts = cfg.solve_options();
    let tol = cfg.verify_tolerances();

    let points: Vec<(VerifyPointRecord, bool)> = cfg
        .mu_grid
        .par_iter()
        .map(|&mu| {
            let mut rec = VerifyPointRecord {
                mu,
                status: "checked".into(),
                certified: None,
                r1_bits: None,
                r2_bits: None,
                checks: None,
            };
            if mu == 1.0 {
                rec.status = "skipped: mu=1 singular".into();
                return (rec, false);
            }
            let sol = match maximize_weighted(&ch, mu, &opts) {
                Ok(s) => s,
                Err(e) => {
                    rec.status = format!("failed: {e}");
                    return (rec, false);
                }
            };
            rec.certified = Some(sol.certified);
            let (r1, r2) = sol.rates.clamped();
            rec.r1_bits = Some(r1);
            rec.r2_bits = Some(r2);
            match verify_enhancement(&ch, &sol.split, &sol.certificate, mu, &tol) {
                Ok(report) => {
                    let bad = sol.certified && !report.all_ok();
                    rec.checks = Some(ChecksRecord::from_report(&report));
                    (rec, bad)
                }
                Err(e) => {
                    rec.status = format!("failed: {e}");
                    (rec, sol.certified)
                }
            }
        })
        .collect();

    let failed = points.iter().any(|(_, bad)| *bad);
    let record = VerificationRecord {
        label: spec.label.clone(),
        t: spec.t,
        seed: cfg.seed,
        verify_tol: tol.verify_tol,
        rate_tol: tol.rate_tol,
        points: points.into_iter().map(|(r, _)| r).collect(),
        failed,
    };
    let path = write(&out, "verification.json", &to_json(&record)?)?;
    println!("wrote {}{}", path.display(), if failed { " (check failures)" } else { "" });
    Ok(if failed { Exit::VerificationFailed } else { Exit::Success })
}

/// Geometric `μ` grid used by `oracle` to trace the boundary it compares against.
pub fn oracle_mu_grid() -> Vec<f64> {
    let n = 100;
    (0..n).map(|k| 100f64.powf(k as f64 / (n - 1) as f64)).collect()
}

#[derive(Serialize)]
struct DominanceRecord {
    label: Option<String>,
    grid_step: f64,
    grid_points: usize,
    front_points: usize,
    oracle_max_r1_bits: f64,
    oracle_max_r2_bits: f64,
    max_violation_bits: f64,
    worst_point_bits: [f64; 2],
    tolerance_bits: f64,
    dominated: bool,
}

/// Non-dominated subset of a stream of pairs, kept sorted by `r1` ascending
/// (and therefore `r2` descending).
#[derive(Default)]
struct ParetoFront(Vec<(f64, f64)>);

impl ParetoFront {
    fn insert(&mut self, p: (f64, f64)) {
        let pos = self.0.partition_point(|q| q.0 < p.0);
        if self.0.get(pos).is_some_and(|q| q.1 >= p.1) {
            return;
        }
        let mut start = pos;
        while start > 0 && self.0[start - 1].1 <= p.1 {
            start -= 1;
        }
        let end = if self.0.get(pos).is_some_and(|q| q.0 == p.0) { pos + 1 } else { pos };
        self.0.splice(start..end, [p]);
    }
}

/// `oracle`: brute-force grid vs. a traced boundary. Writes the grid's Pareto
/// front to `oracle.csv` and the comparison to `dominance.json`.
pub fn run_oracle(args: &OracleArgs) -> Result<Exit> {
    let spec = ChannelSpecFile::load(&args.spec)?;
    let opts = SolveOptions { seed: args.seed.unwrap_or(0), ..SolveOptions::default() };
    let ch = spec.to_channel(opts.feas_tol)?;
    crate::solver::check_oracle_domain(&ch)?;
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("sadbc-out"));

    let mut front = ParetoFront::default();
    brute_force_visit(&ch, args.step, |p| front.insert((p.r1_bits, p.r2_bits)))?;
    let trace = trace_boundary(&ch, &oracle_mu_grid(), &opts)?;
    let summary = oracle_dominance(&ch, args.step, &trace)?;

    let mut csv = String::from("r1_bits,r2_bits\n");
    for (x, y) in &front.0 {
        csv.push_str(&format!("{},{}\n", fmt_sig(*x), fmt_sig(*y)));
    }
    write(&out, "oracle.csv", &csv)?;
    let dominated = summary.max_violation_bits <= DOMINANCE_TOL_BITS;
    let record = DominanceRecord {
        label: spec.label.clone(),
        grid_step: args.step,
        grid_points: summary.points,
        front_points: front.0.len(),
        oracle_max_r1_bits: summary.max_r1_bits,
        oracle_max_r2_bits: summary.max_r2_bits,
        max_violation_bits: summary.max_violation_bits,
        worst_point_bits: [summary.worst.0, summary.worst.1],
        tolerance_bits: DOMINANCE_TOL_BITS,
        dominated,
    };
    let path = write(&out, "dominance.json", &to_json(&record)?)?;
    println!(
        "wrote {} (max violation {} bits over {} grid points)",
        path.display(),
        fmt_sig(summary.max_violation_bits),
        summary.points
    );
    Ok(if dominated { Exit::Success } else { Exit::VerificationFailed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pareto_front_keeps_nondominated() {
        let mut f = ParetoFront::default();
        for p in [(0.0, 1.0), (0.5, 0.5), (0.2, 0.2), (1.0, 0.0), (0.5, 0.7), (0.5, 0.6), (0.0, 0.5)] {
            f.insert(p);
        }
        assert_eq!(f.0, vec![(0.0, 1.0), (0.5, 0.7), (1.0, 0.0)]);
    }
}
