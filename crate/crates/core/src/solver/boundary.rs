//! Sweeping the weight `μ` to trace the boundary of the secrecy region.

use rayon::prelude::*;

use crate::channel::Sadbc;
use crate::error::{Error, Result};

use super::{solve_target, SolveOptions, Solution, Target};

#[derive(Debug, Clone)]
pub struct BoundaryPoint {
    pub target: Target,
    /// Per-point failures are kept as messages; they never abort the sweep.
    pub outcome: std::result::Result<Solution, String>,
}

impl BoundaryPoint {
    pub fn solution(&self) -> Option<&Solution> {
        self.outcome.as_ref().ok()
    }
}

#[derive(Debug, Clone)]
pub struct BoundaryTrace {
    /// Max-R1 corner, then the grid in input order, then the max-R2 corner.
    pub points: Vec<BoundaryPoint>,
    /// Vertices of the upper concave envelope of the achieved pairs (bits),
    /// left to right, starting at `(0, max r2)` and ending at `(max r1, 0)`.
    pub envelope: Vec<(f64, f64)>,
}

impl BoundaryTrace {
    /// Successful points ordered by `r1`; failed points follow in sweep order.
    pub fn sorted_by_r1(&self) -> Vec<&BoundaryPoint> {
        let mut ok: Vec<&BoundaryPoint> = self.points.iter().filter(|p| p.outcome.is_ok()).collect();
        ok.sort_by(|a, b| {
            let ra = a.solution().expect("ok").rates.clamped().0;
            let rb = b.solution().expect("ok").rates.clamped().0;
            ra.total_cmp(&rb)
        });
        ok.extend(self.points.iter().filter(|p| p.outcome.is_err()));
        ok
    }

    /// Envelope height at `r1`; `None` beyond the largest achieved `r1`.
    pub fn envelope_at(&self, r1: f64) -> Option<f64> {
        let last = *self.envelope.last()?;
        if r1 > last.0 {
            return None;
        }
        if r1 <= self.envelope[0].0 {
            return Some(self.envelope[0].1);
        }
        // first vertex with x ≥ r1; it has a predecessor since r1 > x of vertex 0
        let k = self.envelope.partition_point(|p| p.0 < r1);
        let (x0, y0) = self.envelope[k - 1];
        let (x1, y1) = self.envelope[k];
        Some(if x1 == x0 { y0.max(y1) } else { y0 + (y1 - y0) * (r1 - x0) / (x1 - x0) })
    }

    /// How far (bits) a rate pair lies outside the envelope region; `0` if inside.
    pub fn dominance_violation(&self, r1: f64, r2: f64) -> f64 {
        let Some(&(xmax, _)) = self.envelope.last() else {
            return r1.max(r2).max(0.0);
        };
        let height = self.envelope_at(r1.min(xmax)).unwrap_or(0.0);
        (r2 - height).max(r1 - xmax).max(0.0)
    }
}

/// One weighted solve per grid value plus the two corner solves, run in
/// parallel and merged in order.
pub fn trace_boundary(ch: &Sadbc, mu_grid: &[f64], opts: &SolveOptions) -> Result<BoundaryTrace> {
    if mu_grid.is_empty() {
        return Err(Error::InvalidInput("mu grid is empty".into()));
    }
    if let Some(&bad) = mu_grid.iter().find(|m| !(m.is_finite() && **m >= 1.0)) {
        return Err(Error::MuOutOfDomain(bad));
    }
    opts.validate()?;

    let mut targets = vec![Target::MaxR1];
    targets.extend(mu_grid.iter().map(|&mu| Target::Weighted(mu)));
    targets.push(Target::MaxR2);

    let points: Vec<BoundaryPoint> = targets
        .par_iter()
        .map(|&target| BoundaryPoint {
            target,
            outcome: solve_target(ch, target, opts).map_err(|e| e.to_string()),
        })
        .collect();

    let pairs: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| p.solution().map(|s| s.rates.clamped()))
        .collect();
    Ok(BoundaryTrace { envelope: upper_envelope(&pairs), points })
}

/// Upper concave hull of `pairs` together with the axis anchors.
pub(crate) fn upper_envelope(pairs: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let xmax = pairs.iter().fold(0.0_f64, |m, p| m.max(p.0));
    let ymax = pairs.iter().fold(0.0_f64, |m, p| m.max(p.1));
    let mut pts: Vec<(f64, f64)> = pairs.to_vec();
    pts.push((0.0, ymax));
    pts.push((xmax, 0.0));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    pts.dedup_by(|b, a| a.0 == b.0);

    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // drop b unless it lies strictly above the chord a-p
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    if xmax > 0.0 {
        hull.push((xmax, 0.0));
        hull.dedup();
    }
    hull
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_of_a_triangle() {
        let env = upper_envelope(&[(1.0, 0.0), (0.0, 1.0), (0.2, 0.2)]);
        assert_eq!(env, vec![(0.0, 1.0), (1.0, 0.0)]);
    }

    #[test]
    fn envelope_keeps_bulging_vertices() {
        let env = upper_envelope(&[(0.0, 1.0), (0.8, 0.8), (1.0, 0.0), (0.5, 0.5)]);
        assert_eq!(env, vec![(0.0, 1.0), (0.8, 0.8), (1.0, 0.0)]);
    }

    #[test]
    fn dominance_violation_cases() {
        let trace = BoundaryTrace { points: Vec::new(), envelope: vec![(0.0, 1.0), (0.8, 0.8), (1.0, 0.0)] };
        assert_eq!(trace.dominance_violation(0.4, 0.9), 0.0);
        assert!((trace.dominance_violation(0.4, 1.0) - 0.1).abs() < 1e-12);
        assert!((trace.dominance_violation(1.1, 0.0) - 0.1).abs() < 1e-12);
        assert!((trace.envelope_at(0.9).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn all_zero_pairs_give_a_point_envelope() {
        let env = upper_envelope(&[(0.0, 0.0), (0.0, 0.0)]);
        assert_eq!(env, vec![(0.0, 0.0)]);
    }
}
