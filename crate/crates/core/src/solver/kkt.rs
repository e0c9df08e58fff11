//! Lagrange multiplier recovery at a candidate split.
//!
//! With weights `(w1, w2)` the stationarity system is
//!
//! ```text
//! H1 + O1 − O2 = 0,   H1 = w1[(B1+N1)⁻¹ − (B1+N3)⁻¹] + w2[(B1+N3)⁻¹ − (B1+N2)⁻¹]
//! G2 + O2 − O3 = 0,   G2 = w2[(B+N2)⁻¹ − (B+N3)⁻¹]
//! ```
//!
//! and complementary slackness confines each `Ok` to the null space of its
//! constraint. Multipliers are parametrized as `Ok = Uk Zk Ukᵀ` over those null
//! spaces, fitted by minimum-norm least squares, and pushed onto the PSD cone.

use nalgebra::{DMatrix, DVector};

use crate::channel::{PowerSplit, Sadbc};
use crate::error::{Error, Result};
use crate::matrix::SymMatrix;
use crate::rates::RATE_FEAS_TOL;

use super::SolveOptions;

const REFINE_MAX_ITERS: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct KktCertificate {
    pub o1: SymMatrix,
    pub o2: SymMatrix,
    pub o3: SymMatrix,
    /// `‖H1 + O1 − O2‖_F`
    pub stationarity_residual_1: f64,
    /// `‖G2 + O2 − O3‖_F`
    pub stationarity_residual_2: f64,
    /// `Tr{B1 O1}`, `Tr{B2 O2}`, `Tr{(S − B) O3}`.
    pub slackness: [f64; 3],
    pub weights: (f64, f64),
    /// Dimensions of the null spaces treated as active for `B1`, `B2`, `S − B`.
    pub active_ranks: [usize; 3],
}

impl KktCertificate {
    pub fn max_residual(&self) -> f64 {
        self.stationarity_residual_1.max(self.stationarity_residual_2)
    }

    pub fn is_certified(&self, kkt_tol: f64) -> bool {
        self.max_residual() <= kkt_tol
    }

    /// Residuals recomputed from the stored multipliers.
    pub fn recompute_residuals(&self, ch: &Sadbc, split: &PowerSplit) -> Result<(f64, f64)> {
        let (h1, g2) = stationarity_terms(ch, split, self.weights)?;
        Ok(residuals(&h1, &g2, &self.o1, &self.o2, &self.o3))
    }

    pub fn max_abs_slackness(&self) -> f64 {
        self.slackness.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Multipliers for `R1 + μ·R2` at a feasible split.
pub fn recover_multipliers(ch: &Sadbc, split: &PowerSplit, mu: f64) -> Result<KktCertificate> {
    if !(mu.is_finite() && mu >= 1.0) {
        return Err(Error::MuOutOfDomain(mu));
    }
    if !split.feasible(ch, RATE_FEAS_TOL)? {
        return Err(Error::InfeasibleSplit);
    }
    recover_weighted(ch, split, (1.0, mu), SolveOptions::default().feas_tol)
}

fn stationarity_terms(ch: &Sadbc, split: &PowerSplit, w: (f64, f64)) -> Result<(SymMatrix, SymMatrix)> {
    let b = split.total();
    let b1n1 = (&split.b1 + ch.n1()).inverse()?;
    let b1n2 = (&split.b1 + ch.n2()).inverse()?;
    let b1n3 = (&split.b1 + ch.n3()).inverse()?;
    let bn2 = (&b + ch.n2()).inverse()?;
    let bn3 = (&b + ch.n3()).inverse()?;
    let h1 = (&b1n1 - &b1n3).scale(w.0) + (&b1n3 - &b1n2).scale(w.1);
    let g2 = (&bn2 - &bn3).scale(w.1);
    Ok((h1, g2))
}

fn imbalance(h1: &SymMatrix, g2: &SymMatrix, o: [&SymMatrix; 3]) -> (SymMatrix, SymMatrix) {
    (&(h1 + o[0]) - o[1], &(g2 + o[1]) - o[2])
}

fn residuals(h1: &SymMatrix, g2: &SymMatrix, o1: &SymMatrix, o2: &SymMatrix, o3: &SymMatrix) -> (f64, f64) {
    let (e1, e2) = imbalance(h1, g2, [o1, o2, o3]);
    (e1.frobenius_norm(), e2.frobenius_norm())
}

/// Symmetric basis `{Eij}` of `r × r` matrices, lifted through `U`.
fn lifted_basis(u: &DMatrix<f64>) -> Vec<SymMatrix> {
    let r = u.ncols();
    let mut out = Vec::with_capacity(r * (r + 1) / 2);
    for i in 0..r {
        for j in i..r {
            let mut e = DMatrix::<f64>::zeros(r, r);
            e[(i, j)] = 1.0;
            e[(j, i)] = 1.0;
            out.push(SymMatrix::symmetrized(u * e * u.transpose()));
        }
    }
    out
}

fn lift(u: &DMatrix<f64>, z: &Option<SymMatrix>, t: usize) -> SymMatrix {
    match z {
        Some(z) => z.congruence(u),
        None => SymMatrix::zeros(t),
    }
}

fn restrict(u: &DMatrix<f64>, m: &SymMatrix) -> Option<SymMatrix> {
    (u.ncols() > 0).then(|| m.congruence(&u.transpose()))
}

pub(crate) fn recover_weighted(
    ch: &Sadbc,
    split: &PowerSplit,
    w: (f64, f64),
    feas_tol: f64,
) -> Result<KktCertificate> {
    recover_at(ch, split, w, 10.0 * feas_tol * ch.scale())
}

/// Recovery with eigenvalues below `thr` counted as active.
pub(crate) fn recover_at(ch: &Sadbc, split: &PowerSplit, w: (f64, f64), thr: f64) -> Result<KktCertificate> {
    let t = ch.dim();
    let (h1, g2) = stationarity_terms(ch, split, w)?;
    let slack = ch.s() - &split.total();
    let bases = [
        split.b1.eigen().basis_below(thr),
        split.b2.eigen().basis_below(thr),
        slack.eigen().basis_below(thr),
    ];

    // Least-squares fit of the linear system over all t² entries of both equations.
    let cols: Vec<(usize, SymMatrix)> = bases
        .iter()
        .enumerate()
        .flat_map(|(k, u)| lifted_basis(u).into_iter().map(move |m| (k, m)))
        .collect();
    let n = t * t;
    let mut z: [Option<SymMatrix>; 3] = [None, None, None];
    if !cols.is_empty() {
        let mut a = DMatrix::<f64>::zeros(2 * n, cols.len());
        for (c, (k, m)) in cols.iter().enumerate() {
            // O1 enters eq1 with +, O2 enters eq1 with − and eq2 with +, O3 enters eq2 with −.
            let (s1, s2) = match k {
                0 => (1.0, 0.0),
                1 => (-1.0, 1.0),
                _ => (0.0, -1.0),
            };
            for (idx, v) in m.as_matrix().iter().enumerate() {
                a[(idx, c)] = s1 * v;
                a[(n + idx, c)] = s2 * v;
            }
        }
        let rhs = DVector::from_iterator(
            2 * n,
            h1.as_matrix().iter().chain(g2.as_matrix().iter()).map(|v| -v),
        );
        let svd = a.svd(true, true);
        let top = svd.singular_values.max();
        let x = svd
            .solve(&rhs, 1e-12 * top.max(f64::MIN_POSITIVE))
            .map_err(|e| Error::Internal(format!("multiplier least squares: {e}")))?;

        let mut offset = 0;
        for (k, u) in bases.iter().enumerate() {
            let r = u.ncols();
            if r == 0 {
                continue;
            }
            let mut zm = DMatrix::<f64>::zeros(r, r);
            for i in 0..r {
                for j in i..r {
                    zm[(i, j)] = x[offset];
                    zm[(j, i)] = x[offset];
                    offset += 1;
                }
            }
            z[k] = Some(SymMatrix::symmetrized(zm));
        }
    }

    let projected: [Option<SymMatrix>; 3] = z.clone().map(|zk| zk.map(|m| m.project_psd()));
    let moved = z
        .iter()
        .zip(&projected)
        .any(|(a, b)| matches!((a, b), (Some(a), Some(b)) if (a - b).frobenius_norm() > 0.0));
    let build = |zs: &[Option<SymMatrix>; 3]| -> [SymMatrix; 3] {
        [lift(&bases[0], &zs[0], t), lift(&bases[1], &zs[1], t), lift(&bases[2], &zs[2], t)]
    };
    let mut o = build(&projected);
    if moved {
        let refined = build(&refine(&h1, &g2, &bases, projected));
        let (a1, a2) = residuals(&h1, &g2, &o[0], &o[1], &o[2]);
        let (b1, b2) = residuals(&h1, &g2, &refined[0], &refined[1], &refined[2]);
        if b1.max(b2) < a1.max(a2) {
            o = refined;
        }
    }

    let [o1, o2, o3] = o;
    let (r1, r2) = residuals(&h1, &g2, &o1, &o2, &o3);
    let slackness = [split.b1.trace_product(&o1), split.b2.trace_product(&o2), slack.trace_product(&o3)];
    Ok(KktCertificate {
        o1,
        o2,
        o3,
        stationarity_residual_1: r1,
        stationarity_residual_2: r2,
        slackness,
        weights: w,
        active_ranks: [bases[0].ncols(), bases[1].ncols(), bases[2].ncols()],
    })
}

/// Accelerated projected gradient on `½‖E1‖² + ½‖E2‖²` with each `Zk ⪰ 0`.
/// The linear map `Z ↦ (E1, E2)` has squared norm 3, hence the fixed step.
fn refine(
    h1: &SymMatrix,
    g2: &SymMatrix,
    bases: &[DMatrix<f64>; 3],
    start: [Option<SymMatrix>; 3],
) -> [Option<SymMatrix>; 3] {
    let t = h1.dim();
    let step = 1.0 / 3.0;
    let mut x = start.clone();
    let mut y = start;
    let mut theta = 1.0_f64;
    for _ in 0..REFINE_MAX_ITERS {
        let o: Vec<SymMatrix> = (0..3).map(|k| lift(&bases[k], &y[k], t)).collect();
        let (e1, e2) = imbalance(h1, g2, [&o[0], &o[1], &o[2]]);
        let grads = [e1.clone(), &e2 - &e1, -&e2];
        let next: [Option<SymMatrix>; 3] = std::array::from_fn(|k| {
            let yk = y[k].as_ref()?;
            let gk = restrict(&bases[k], &grads[k])?;
            Some((yk - &gk.scale(step)).project_psd())
        });
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let beta = (theta - 1.0) / theta_next;
        let mut change = 0.0;
        let mut size = 0.0;
        for k in 0..3 {
            if let (Some(n), Some(p)) = (&next[k], &x[k]) {
                let d = n - p;
                change += d.frobenius_norm().powi(2);
                size += n.frobenius_norm().powi(2);
                y[k] = Some(n + &d.scale(beta));
            }
        }
        x = next;
        theta = theta_next;
        if change.sqrt() <= 1e-15 * (1.0 + size.sqrt()) {
            break;
        }
    }
    x.map(|z| z.map(|m| m.project_psd()))
}
