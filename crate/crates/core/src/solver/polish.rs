//! Newton refinement on the face where the ascent stopped.
//!
//! Near a point where `Y1` has eigenvalues pinned at 0 or 1, projected
//! gradient only moves the eigenvectors through slow rotations, and rounding
//! in the projection stalls it around residuals of `1e-8`. Here `Y1` is
//! written as `Q C(K) D C(K)ᵀ Qᵀ` with `C` the Cayley transform of a skew `K`,
//! pinned eigenvalues fixed and the rest free, and Newton's method is run on
//! that smooth parametrization. The Hessian is a central difference of the
//! analytic gradient.

use nalgebra::DMatrix;

use crate::channel::Whitening;
use crate::error::Result;
use crate::matrix::SymMatrix;
use crate::rates::{objective_gain, Noises};

use super::{gradient_y1, lift, Target};

const MAX_NEWTON: usize = 20;
const FD_STEP: f64 = 1e-5;

#[derive(Clone, Copy)]
enum Param {
    Rot(usize, usize),
    Val(usize),
}

struct Frame {
    q: DMatrix<f64>,
    d: Vec<f64>,
}

impl Frame {
    fn y1(&self) -> SymMatrix {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.d));
        SymMatrix::symmetrized(&self.q * d * self.q.transpose())
    }

    fn moved(&self, params: &[Param], p: &[f64]) -> Frame {
        let n = self.d.len();
        let mut k = DMatrix::zeros(n, n);
        let mut d = self.d.clone();
        for (param, &v) in params.iter().zip(p) {
            match *param {
                Param::Rot(i, j) => {
                    k[(i, j)] += v;
                    k[(j, i)] -= v;
                }
                Param::Val(i) => d[i] += v,
            }
        }
        let eye = DMatrix::<f64>::identity(n, n);
        let half = &k * 0.5;
        let cayley = (&eye - &half).lu().solve(&(&eye + &half)).expect("I − K/2 is invertible for skew K");
        Frame { q: &self.q * cayley, d }
    }
}

struct Problem<'a> {
    white: &'a Whitening,
    noises: Noises<'a>,
    target: Target,
    params: Vec<Param>,
}

impl Problem<'_> {
    /// Derivative of the objective along each parameter at `K = 0`.
    fn grad(&self, f: &Frame) -> Result<Vec<f64>> {
        let x = lift(self.white, &f.y1(), self.target);
        let g = gradient_y1(self.white, self.noises, self.target, &x)?;
        let gh = f.q.transpose() * g.as_matrix() * &f.q;
        Ok(self
            .params
            .iter()
            .map(|p| match *p {
                Param::Rot(i, j) => 2.0 * (f.d[j] - f.d[i]) * gh[(i, j)],
                Param::Val(i) => gh[(i, i)],
            })
            .collect())
    }

    /// A free eigenvalue of `f` outside `(0, 1)`.
    fn escaping(&self, f: &Frame) -> Option<usize> {
        self.params.iter().find_map(|p| match *p {
            Param::Val(i) if !(f.d[i] > 0.0 && f.d[i] < 1.0) => Some(i),
            _ => None,
        })
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn params_for(class: &[u8]) -> Vec<Param> {
    let n = class.len();
    let mut params = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if class[i] != class[j] || class[i] == 1 {
                params.push(Param::Rot(i, j));
            }
        }
        if class[i] == 1 {
            params.push(Param::Val(i));
        }
    }
    params
}

/// Refine `y1`, whose eigenvalues within `thr` of 0 or 1 count as pinned.
/// A free eigenvalue that a Newton step would push past 0 or 1 is pinned
/// there and the refinement restarts on the smaller face.
pub(super) fn polish(
    white: &Whitening,
    noises: Noises<'_>,
    target: Target,
    y1: &SymMatrix,
    thr: f64,
) -> Result<SymMatrix> {
    let eig = y1.eigen();
    // 0: pinned at 0, 1: free, 2: pinned at 1
    let mut class: Vec<u8> = eig
        .values
        .iter()
        .map(|&l| if l < thr { 0 } else if l > 1.0 - thr { 2 } else { 1 })
        .collect();
    let pinned = |d: &mut Vec<f64>, class: &[u8]| {
        for (v, c) in d.iter_mut().zip(class) {
            match c {
                0 => *v = 0.0,
                2 => *v = 1.0,
                _ => {}
            }
        }
    };
    let mut d = eig.values.clone();
    pinned(&mut d, &class);
    let mut frame = Frame { q: eig.vectors.clone(), d };
    let f_start = lift(white, &frame.y1(), target);

    for _ in 0..=class.len() {
        let prob = Problem { white, noises, target, params: params_for(&class) };
        if prob.params.is_empty() {
            break;
        }
        let (next, blocked) = newton(&prob, frame)?;
        frame = next;
        let Some(i) = blocked else {
            break;
        };
        class[i] = if frame.d[i] < 0.5 { 0 } else { 2 };
        pinned(&mut frame.d, &class);
    }
    // pinning can only be kept if it did not cost objective
    let gain = objective_gain(&f_start, &lift(white, &frame.y1(), target), noises, target.weights())?;
    Ok(if gain >= -1e-15 { frame.y1() } else { y1.clone() })
}

/// Newton iterations on one face. Returns the last accepted frame and, if the
/// full step tried to leave the face through a free eigenvalue, its index.
fn newton(prob: &Problem<'_>, mut frame: Frame) -> Result<(Frame, Option<usize>)> {
    let m = prob.params.len();
    let mut g = prob.grad(&frame)?;
    for _ in 0..MAX_NEWTON {
        let gnorm = norm(&g);
        if gnorm == 0.0 {
            break;
        }
        let mut hess = DMatrix::zeros(m, m);
        for j in 0..m {
            let mut e = vec![0.0; m];
            e[j] = FD_STEP;
            let plus = prob.grad(&frame.moved(&prob.params, &e))?;
            e[j] = -FD_STEP;
            let minus = prob.grad(&frame.moved(&prob.params, &e))?;
            for i in 0..m {
                hess[(i, j)] = (plus[i] - minus[i]) / (2.0 * FD_STEP);
            }
        }
        let hess = (&hess + hess.transpose()) * 0.5;
        let rhs = -nalgebra::DVector::from_vec(g.clone());
        let svd = hess.svd(true, true);
        let eps = 1e-12 * svd.singular_values.max();
        let Ok(delta) = svd.solve(&rhs, eps) else {
            break;
        };

        let full = frame.moved(&prob.params, delta.as_slice());
        if let Some(i) = prob.escaping(&full) {
            return Ok((frame, Some(i)));
        }
        let x_old = lift(prob.white, &frame.y1(), prob.target);
        let mut accepted = None;
        let mut scale = 1.0;
        for _ in 0..8 {
            let p: Vec<f64> = delta.iter().map(|v| v * scale).collect();
            let cand = frame.moved(&prob.params, &p);
            let gain =
                objective_gain(&x_old, &lift(prob.white, &cand.y1(), prob.target), prob.noises, prob.target.weights())?;
            let g_new = prob.grad(&cand)?;
            if gain >= -1e-15 && norm(&g_new) < gnorm {
                accepted = Some((cand, g_new));
                break;
            }
            scale *= 0.5;
        }
        let Some((cand, g_new)) = accepted else {
            break;
        };
        frame = cand;
        g = g_new;
    }
    Ok((frame, None))
}
