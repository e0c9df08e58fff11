//! Brute-force grid oracle for scalar and diagonal two-antenna channels.
//!
//! On those shapes a diagonal split decouples into independent scalar
//! channels, so rates are sums of per-coordinate closed forms. None of the
//! matrix code is used here, which keeps the oracle independent of the solver.

use crate::channel::Sadbc;
use crate::error::{Error, Result};
use crate::rates::RatePair;

use super::BoundaryTrace;

/// Reject channels outside the oracle's domain.
pub fn check_oracle_domain(ch: &Sadbc) -> Result<()> {
    match ch.dim() {
        1 => Ok(()),
        2 if ch.is_diagonal() => Ok(()),
        2 => Err(Error::OracleDomain(
            "t = 2 requires S, N1, N2, N3 all diagonal".into(),
        )),
        t => Err(Error::OracleDomain(format!(
            "supported only for t = 1 or diagonal t = 2, got t = {t}"
        ))),
    }
}

fn half_log2(x: f64) -> f64 {
    0.5 * x.log2()
}

/// Scalar secrecy rates in bits, written directly from the closed forms.
fn scalar_rates(b1: f64, b2: f64, n: [f64; 3]) -> (f64, f64) {
    let b = b1 + b2;
    let r1 = half_log2((b1 + n[0]) / n[0]) - half_log2((b1 + n[2]) / n[2]);
    let r2 = half_log2((b + n[1]) / (b1 + n[1])) - half_log2((b + n[2]) / (b1 + n[2]));
    (r1, r2)
}

/// `{0, h, 2h, …} ∩ [0, top)` followed by `top` itself.
fn lattice(top: f64, h: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0u64;
    loop {
        let v = k as f64 * h;
        // a multiple of h that only misses top by rounding is top itself
        if v >= top - 1e-9 * h {
            break;
        }
        out.push(v);
        k += 1;
    }
    out.push(top);
    out
}

/// All `(b1, b2)` pairs for one scalar coordinate: `b1` on the lattice, `b2`
/// on the lattice of the remaining power plus the boundary point `s − b1`.
fn coordinate_pairs(s: f64, n: [f64; 3], h: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for b1 in lattice(s, h) {
        let room = (s - b1).max(0.0);
        for b2 in lattice(room, h) {
            out.push(scalar_rates(b1, b2, n));
        }
    }
    out
}

/// Stream every grid rate pair to `visit`; returns the number of points.
pub fn brute_force_visit(ch: &Sadbc, grid_step: f64, mut visit: impl FnMut(RatePair)) -> Result<usize> {
    check_oracle_domain(ch)?;
    if !(grid_step.is_finite() && grid_step > 0.0) {
        return Err(Error::InvalidInput(format!("grid step must be positive, got {grid_step}")));
    }
    let coords: Vec<Vec<(f64, f64)>> = (0..ch.dim())
        .map(|i| {
            let n = [ch.n1().get(i, i), ch.n2().get(i, i), ch.n3().get(i, i)];
            coordinate_pairs(ch.s().get(i, i).max(0.0), n, grid_step)
        })
        .collect();

    let emit = |visit: &mut dyn FnMut(RatePair), r1: f64, r2: f64| {
        visit(RatePair { r1_bits: r1, r2_bits: r2, mu: None })
    };
    let mut count = 0;
    match coords.as_slice() {
        [only] => {
            for &(r1, r2) in only {
                emit(&mut visit, r1, r2);
                count += 1;
            }
        }
        [first, second] => {
            for &(a1, a2) in first {
                for &(c1, c2) in second {
                    emit(&mut visit, a1 + c1, a2 + c2);
                    count += 1;
                }
            }
        }
        _ => unreachable!("domain checked above"),
    }
    Ok(count)
}

/// Every grid rate pair, collected. Prefer [`brute_force_visit`] for fine grids at `t = 2`.
pub fn brute_force_region(ch: &Sadbc, grid_step: f64) -> Result<Vec<RatePair>> {
    let mut out = Vec::new();
    brute_force_visit(ch, grid_step, |p| out.push(p))?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSummary {
    pub points: usize,
    pub max_r1_bits: f64,
    pub max_r2_bits: f64,
    /// Largest distance (bits) of a grid pair outside the traced envelope.
    pub max_violation_bits: f64,
    pub worst: (f64, f64),
}

/// Compare every oracle grid pair against a traced boundary.
pub fn oracle_dominance(ch: &Sadbc, grid_step: f64, trace: &BoundaryTrace) -> Result<OracleSummary> {
    let mut summary = OracleSummary {
        points: 0,
        max_r1_bits: 0.0,
        max_r2_bits: 0.0,
        max_violation_bits: 0.0,
        worst: (0.0, 0.0),
    };
    summary.points = brute_force_visit(ch, grid_step, |p| {
        summary.max_r1_bits = summary.max_r1_bits.max(p.r1_bits);
        summary.max_r2_bits = summary.max_r2_bits.max(p.r2_bits);
        let v = trace.dominance_violation(p.r1_bits, p.r2_bits);
        if v > summary.max_violation_bits {
            summary.max_violation_bits = v;
            summary.worst = (p.r1_bits, p.r2_bits);
        }
    })?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SymMatrix;

    fn scalar() -> Sadbc {
        Sadbc::validate(
            1,
            SymMatrix::scalar(2.0),
            SymMatrix::scalar(1.0),
            SymMatrix::scalar(2.0),
            SymMatrix::scalar(3.0),
            1e-9,
        )
        .unwrap()
    }

    #[test]
    fn scalar_grid_max_r1() {
        let pts = brute_force_region(&scalar(), 0.01).unwrap();
        let best = pts.iter().fold(f64::MIN, |m, p| m.max(p.r1_bits));
        assert!((best - 0.5 * (9.0_f64 / 5.0).log2()).abs() < 0.005);
        assert!((best - 0.42400).abs() < 0.005);
    }

    #[test]
    fn coarse_step_keeps_origin_and_boundary() {
        let pts = brute_force_region(&scalar(), 5.0).unwrap();
        // b1 ∈ {0, 2}; b2 ∈ {0, 2} for b1 = 0 and {0} for b1 = 2
        assert_eq!(pts.len(), 3);
        assert!(pts.iter().any(|p| p.r1_bits == 0.0 && p.r2_bits == 0.0));
    }

    #[test]
    fn domain_guard() {
        let ch = Sadbc::random_instance(2, 3, 1.0);
        assert!(matches!(brute_force_region(&ch, 0.1), Err(Error::OracleDomain(_))));
        let ch = Sadbc::random_diagonal_instance(3, 3, 1.0);
        assert!(matches!(brute_force_region(&ch, 0.1), Err(Error::OracleDomain(_))));
        assert!(brute_force_region(&scalar(), 0.0).is_err());
    }

    #[test]
    fn diagonal_grid_is_a_product() {
        let ch = Sadbc::random_diagonal_instance(2, 5, 1.0);
        let n = brute_force_visit(&ch, 0.1, |_| {}).unwrap();
        let per: Vec<usize> = (0..2)
            .map(|i| {
                let nn = [ch.n1().get(i, i), ch.n2().get(i, i), ch.n3().get(i, i)];
                coordinate_pairs(ch.s().get(i, i), nn, 0.1).len()
            })
            .collect();
        assert_eq!(n, per[0] * per[1]);
    }
}
