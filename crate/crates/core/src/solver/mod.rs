//! Weighted secrecy-sum-rate maximization over feasible covariance splits.
//!
//! The objective `R1 + μ·R2` is not concave in `(B1, B2)`, so every solve is
//! a multi-start projected gradient ascent with Armijo backtracking. Iterates
//! live in coordinates whitened by `S`, restricted to the face where all of
//! `S` is used (see `lift`), so the projection is an eigenvalue clamp.
//! Each returned point carries a [`KktCertificate`] so its quality can be
//! audited independently of how it was found.

mod boundary;
mod kkt;
mod oracle;
mod polish;

pub use boundary::{trace_boundary, BoundaryPoint, BoundaryTrace};
pub use kkt::{recover_multipliers, KktCertificate};
pub use oracle::{brute_force_region, brute_force_visit, check_oracle_domain, oracle_dominance, OracleSummary};

pub(crate) use kkt::{recover_at, recover_weighted};

use polish::polish;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{PowerSplit, Sadbc, Whitening};
use crate::error::{Error, Result};
use crate::matrix::SymMatrix;
use crate::nats_to_bits;
use crate::rates::{gradient_nats, objective_gain, objective_nats, rates_nats, Noises, RatePair};

/// Gradient-mapping norm (whitened frame) below which a run is stationary.
const PG_TOL: f64 = 1e-12;
const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub max_iters: usize,
    pub step_init: f64,
    pub armijo_c: f64,
    pub restarts: usize,
    pub seed: u64,
    pub kkt_tol: f64,
    pub feas_tol: f64,
    /// Keep the per-iteration log of the winning run.
    pub record_log: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            step_init: 0.1,
            armijo_c: 1e-4,
            restarts: 8,
            seed: 0,
            kkt_tol: 1e-6,
            feas_tol: 1e-8,
            record_log: false,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.step_init, self.armijo_c, self.kkt_tol, self.feas_tol]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if !positive || self.max_iters == 0 || self.restarts == 0 || self.armijo_c >= 1.0 {
            return Err(Error::InvalidInput(format!("invalid solver options: {self:?}")));
        }
        Ok(())
    }
}

/// Which boundary functional a solve maximizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    /// `R1 + μ·R2`, `μ ≥ 1`.
    Weighted(f64),
    /// `R1` alone with `B2 = 0`; covers every weighting that favours `R1`.
    MaxR1,
    /// `R2` alone.
    MaxR2,
}

impl Target {
    pub fn weights(&self) -> (f64, f64) {
        match *self {
            Target::Weighted(mu) => (1.0, mu),
            Target::MaxR1 => (1.0, 0.0),
            Target::MaxR2 => (0.0, 1.0),
        }
    }

    fn pins_b2(&self) -> bool {
        matches!(self, Target::MaxR1)
    }

    /// Effective `μ` of the weighting: `0` for the `R1` corner, `∞` for the `R2` corner.
    pub fn mu_value(&self) -> f64 {
        match *self {
            Target::Weighted(mu) => mu,
            Target::MaxR1 => 0.0,
            Target::MaxR2 => f64::INFINITY,
        }
    }
}

/// One accepted iteration: `(iter, objective_nats, step, feas_gap)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub objective_nats: f64,
    pub step: f64,
    pub feas_gap: f64,
}

impl IterRecord {
    /// Whitespace-separated line for debug dumps; not a stable format.
    pub fn to_line(&self) -> String {
        format!("{} {:.17e} {:.6e} {:.3e}", self.iter, self.objective_nats, self.step, self.feas_gap)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub target: Target,
    pub split: PowerSplit,
    pub rates: RatePair,
    pub objective_nats: f64,
    pub certificate: KktCertificate,
    /// Both stationarity residuals are within `kkt_tol`.
    pub certified: bool,
    /// The winning run reached the stationarity test rather than stalling or hitting `max_iters`.
    pub converged: bool,
    pub iterations: usize,
    /// Index of the start that produced the winner.
    pub restart: usize,
    pub log: Vec<IterRecord>,
}

/// Maximize `R1 + μ·R2` over feasible splits.
pub fn maximize_weighted(ch: &Sadbc, mu: f64, opts: &SolveOptions) -> Result<Solution> {
    if !(mu.is_finite() && mu >= 1.0) {
        return Err(Error::MuOutOfDomain(mu));
    }
    solve_target(ch, Target::Weighted(mu), opts)
}

/// Largest achievable `R1`, found with `B2 = 0`.
pub fn maximize_r1(ch: &Sadbc, opts: &SolveOptions) -> Result<Solution> {
    solve_target(ch, Target::MaxR1, opts)
}

/// Largest achievable `R2`.
pub fn maximize_r2(ch: &Sadbc, opts: &SolveOptions) -> Result<Solution> {
    solve_target(ch, Target::MaxR2, opts)
}

struct Run {
    y1: SymMatrix,
    objective: f64,
    converged: bool,
    iterations: usize,
    log: Vec<IterRecord>,
}

pub fn solve_target(ch: &Sadbc, target: Target, opts: &SolveOptions) -> Result<Solution> {
    opts.validate()?;
    let white = Whitening::new(ch.s());
    let noises = Noises::of(ch);
    let w = target.weights();

    let mut best: Option<(usize, Run)> = None;
    if white.rank() == 0 {
        let run = Run { y1: SymMatrix::zeros(1), objective: 0.0, converged: true, iterations: 0, log: Vec::new() };
        best = Some((0, run));
    } else {
        for (k, start) in starts(white.rank(), opts).into_iter().enumerate() {
            let run = ascend(&white, noises, target, start, opts)?;
            let better = best.as_ref().is_none_or(|(_, b)| run.objective > b.objective);
            if better {
                best = Some((k, run));
            }
        }
    }
    let (restart, run) = best.expect("at least one start");
    if run.objective < -1e-12 {
        return Err(Error::Internal(format!(
            "best objective {} is below the zero split's value",
            run.objective
        )));
    }

    let split = if white.rank() == 0 {
        PowerSplit::zero(ch.dim())
    } else {
        let raw = lift(&white, &run.y1, target);
        let thr = 10.0 * opts.feas_tol;
        let snapped = lift(&white, &polish(&white, noises, target, &snap(&run.y1, thr), thr)?, target);
        let f_raw = objective_nats(&raw, noises, w)?;
        let f_snap = objective_nats(&snapped, noises, w)?;
        if f_snap >= f_raw - 1e-12 * (1.0 + f_raw.abs()) {
            snapped
        } else {
            raw
        }
    };

    let (r1, r2) = rates_nats(&split, noises)?;
    let objective_nats = w.0 * r1 + w.1 * r2;
    // Snapped points have exact zeros, so a near-rounding threshold can find
    // a cleaner active set than the feasibility one; keep whichever fits better.
    let loose = recover_weighted(ch, &split, w, opts.feas_tol)?;
    let tight = recover_at(ch, &split, w, 1e-12 * ch.scale())?;
    let misfit = |c: &KktCertificate| c.max_residual().max(c.max_abs_slackness());
    let certificate = if misfit(&tight) < misfit(&loose) { tight } else { loose };
    let certified = certificate.max_residual() <= opts.kkt_tol;
    let mu = match target {
        Target::Weighted(mu) => Some(mu),
        _ => None,
    };
    Ok(Solution {
        target,
        rates: RatePair { r1_bits: nats_to_bits(r1), r2_bits: nats_to_bits(r2), mu },
        split,
        objective_nats,
        certificate,
        certified,
        converged: run.converged,
        iterations: run.iterations,
        restart,
        log: if opts.record_log { run.log } else { Vec::new() },
    })
}

// The gradient in B2 is ½w2[(B+N2)⁻¹ − (B+N3)⁻¹] ⪰ 0 everywhere, so topping
// B2 up to S − B1 never lowers the objective and some maximizer has B = S.
// The search therefore runs over Y1 alone with Y2 = I − Y1 (or Y2 = 0 when
// B2 is pinned), and the projection onto 0 ⪯ Y1 ⪯ I is an eigenvalue clamp.
fn lift(white: &Whitening, y1: &SymMatrix, target: Target) -> PowerSplit {
    let b1 = white.from_unit(y1);
    let b2 = if target.pins_b2() {
        SymMatrix::zeros(b1.dim())
    } else {
        white.from_unit(&(&SymMatrix::identity(y1.dim()) - y1))
    };
    PowerSplit { b1, b2 }
}

fn clamp_unit(y: &SymMatrix) -> SymMatrix {
    y.eigen().recompose(|l| l.clamp(0.0, 1.0))
}

/// `Y1` of the structured starts (nothing, everything, half to layer 1),
/// then seeded random ones.
fn starts(r: usize, opts: &SolveOptions) -> Vec<SymMatrix> {
    let eye = SymMatrix::identity(r);
    let mut out = vec![SymMatrix::zeros(r), eye.clone(), eye.scale(0.5)];
    out.truncate(opts.restarts);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    while out.len() < opts.restarts {
        out.push(PowerSplit::random_unit(r, &mut rng).b1);
    }
    out
}

fn gradient_y1(white: &Whitening, noises: Noises<'_>, target: Target, x: &PowerSplit) -> Result<SymMatrix> {
    let g = gradient_nats(x, noises, target.weights())?;
    let g1 = white.pull_back(&g.b1);
    Ok(if target.pins_b2() { g1 } else { &g1 - &white.pull_back(&g.b2) })
}

fn ascend(
    white: &Whitening,
    noises: Noises<'_>,
    target: Target,
    start: SymMatrix,
    opts: &SolveOptions,
) -> Result<Run> {
    let w = target.weights();
    let mut y = clamp_unit(&start);
    let mut x = lift(white, &y, target);
    // Running objective: accumulated gains, so tiny improvements near the
    // optimum are not swamped by rounding in the absolute value.
    let mut f = objective_nats(&x, noises, w)?;
    let mut g = gradient_y1(white, noises, target, &x)?;
    let mut step = opts.step_init;
    let mut log = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let reach = 4.0 * (y.dim() as f64).sqrt();

    for iter in 0..opts.max_iters {
        iterations = iter + 1;
        // One projection per iteration, then Armijo backtracking along the
        // feasible direction; convex combinations of feasible points stay feasible.
        step = step.min(reach / g.frobenius_norm().max(f64::MIN_POSITIVE));
        let trial = &y + &g.scale(step);
        let proj = clamp_unit(&trial);
        let d = &proj - &y;
        let slope = g.dot(&d);
        if d.frobenius_norm() / step <= PG_TOL || slope <= 0.0 {
            converged = true;
            break;
        }
        let mut accepted = None;
        let mut lambda = 1.0;
        for _ in 0..MAX_BACKTRACKS {
            let cand = if lambda == 1.0 { proj.clone() } else { &y + &d.scale(lambda) };
            let x_new = lift(white, &cand, target);
            let gain = objective_gain(&x, &x_new, noises, w)?;
            if gain >= opts.armijo_c * lambda * slope {
                accepted = Some((cand, x_new, gain));
                break;
            }
            lambda *= 0.5;
        }
        let Some((y_new, x_new, gain)) = accepted else {
            break;
        };
        let g_new = gradient_y1(white, noises, target, &x_new)?;
        f += gain;
        if opts.record_log {
            let gap = (&trial - &proj).frobenius_norm();
            log.push(IterRecord { iter, objective_nats: f, step: step * lambda, feas_gap: gap });
        }

        // Barzilai-Borwein step for the next iteration (ascent: curvature of −f)
        let sd = &y_new - &y;
        let curvature = -sd.dot(&(&g_new - &g));
        step = if curvature > 0.0 {
            (sd.dot(&sd) / curvature).clamp(1e-10, 1e10)
        } else {
            (step * 4.0).min(1e10)
        };
        y = y_new;
        x = x_new;
        g = g_new;
    }
    let objective = objective_nats(&x, noises, w)?;
    Ok(Run { y1: y, objective, converged, iterations, log })
}

/// Round eigenvalues of `Y1` within `thr` of 0 or 1 onto the bound, so that
/// constraints the ascent has driven to the boundary are exactly active.
fn snap(y1: &SymMatrix, thr: f64) -> SymMatrix {
    y1.eigen().recompose(|l| {
        if l < thr {
            0.0
        } else if l > 1.0 - thr {
            1.0
        } else {
            l
        }
    })
}
