//! Aligned degraded broadcast channel instances and input covariance splits.
//!
//! A channel is `y_k = x + n_k` for the two legitimate receivers (`k = 1, 2`)
//! and `z = x + n_3` for the eavesdropper, with noise covariances ordered
//! `0 ≺ N1 ⪯ N2 ⪯ N3` and the input constrained by `E[x xᵀ] ⪯ S`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result, Violation};
use crate::matrix::SymMatrix;

/// Identity floor added to `N1` by the random generator.
pub const NOISE_FLOOR: f64 = 0.1;

pub const CLAMP_MAX_SWEEPS: usize = 500;
pub const CLAMP_GAP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Sadbc {
    s: SymMatrix,
    n1: SymMatrix,
    n2: SymMatrix,
    n3: SymMatrix,
}

impl Sadbc {
    /// Check every channel condition and collect all failures.
    pub fn validate(
        t: usize,
        s: SymMatrix,
        n1: SymMatrix,
        n2: SymMatrix,
        n3: SymMatrix,
        tol: f64,
    ) -> Result<Self> {
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(Error::InvalidInput(format!("tolerance must be finite and >= 0, got {tol}")));
        }
        let mut violations = Vec::new();
        for (name, m) in [("S", &s), ("N1", &n1), ("N2", &n2), ("N3", &n3)] {
            if m.dim() != t {
                violations.push(Violation {
                    condition: format!("dim({name}) = {t}"),
                    detail: format!("dim({name}) = {}", m.dim()),
                });
            }
        }
        if !violations.is_empty() {
            return Err(Error::InvalidChannel(violations));
        }

        let e = s.eigen();
        if e.min() < -tol * (1.0 + e.max_abs()) {
            violations.push(Violation {
                condition: "S ⪰ 0".into(),
                detail: format!("min-eig(S) = {}", fmt_eig(e.min())),
            });
        }
        for (name, m) in [("N1", &n1), ("N2", &n2), ("N3", &n3)] {
            let e = m.eigen();
            if e.min() <= tol * (1.0 + e.max_abs()) {
                violations.push(Violation {
                    condition: format!("{name} ≻ 0"),
                    detail: format!("min-eig({name}) = {}", fmt_eig(e.min())),
                });
            }
        }
        for (lo, hi, a, b) in [("N1", "N2", &n1, &n2), ("N2", "N3", &n2, &n3)] {
            let e = (b - a).eigen();
            if e.min() < -tol * (1.0 + e.max_abs()) {
                violations.push(Violation {
                    condition: format!("{lo} ⪯ {hi}"),
                    detail: format!("min-eig({hi}−{lo}) = {}", fmt_eig(e.min())),
                });
            }
        }

        if violations.is_empty() {
            Ok(Self { s, n1, n2, n3 })
        } else {
            Err(Error::InvalidChannel(violations))
        }
    }

    /// Seeded random instance: `N1 = G1G1ᵀ + 0.1·I`, `N2 = N1 + G2G2ᵀ`,
    /// `N3 = N2 + G3G3ᵀ`, `S = power_scale·G4G4ᵀ` with standard normal `Gi`.
    pub fn random_instance(t: usize, seed: u64, power_scale: f64) -> Self {
        assert!(t >= 1, "antenna count must be at least 1");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gram = || {
            let g = DMatrix::<f64>::from_fn(t, t, |_, _| StandardNormal.sample(&mut rng));
            SymMatrix::symmetrized(&g * g.transpose())
        };
        let n1 = &gram() + &SymMatrix::identity(t).scale(NOISE_FLOOR);
        let n2 = &n1 + &gram();
        let n3 = &n2 + &gram();
        let s = gram().scale(power_scale);
        Self { s, n1, n2, n3 }
    }

    /// Seeded random instance with every matrix diagonal, built per antenna
    /// the same way as [`random_instance`](Self::random_instance).
    pub fn random_diagonal_instance(t: usize, seed: u64, power_scale: f64) -> Self {
        assert!(t >= 1, "antenna count must be at least 1");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sq = || {
            let g: f64 = StandardNormal.sample(&mut rng);
            g * g
        };
        let mut d = [vec![0.0; t], vec![0.0; t], vec![0.0; t], vec![0.0; t]];
        for i in 0..t {
            d[1][i] = sq() + NOISE_FLOOR;
            d[2][i] = d[1][i] + sq();
            d[3][i] = d[2][i] + sq();
            d[0][i] = power_scale * sq();
        }
        Self {
            s: SymMatrix::diag(&d[0]),
            n1: SymMatrix::diag(&d[1]),
            n2: SymMatrix::diag(&d[2]),
            n3: SymMatrix::diag(&d[3]),
        }
    }

    pub fn dim(&self) -> usize {
        self.s.dim()
    }

    pub fn s(&self) -> &SymMatrix {
        &self.s
    }

    pub fn n1(&self) -> &SymMatrix {
        &self.n1
    }

    pub fn n2(&self) -> &SymMatrix {
        &self.n2
    }

    pub fn n3(&self) -> &SymMatrix {
        &self.n3
    }

    /// `1 + max |λ|` over the eigenvalues of `S` and `N3`; used to make
    /// absolute thresholds relative to the channel's power scale.
    pub fn scale(&self) -> f64 {
        1.0 + self.s.eigen().max_abs().max(self.n3.eigen().max_abs())
    }

    pub fn is_diagonal(&self) -> bool {
        [&self.s, &self.n1, &self.n2, &self.n3].iter().all(|m| m.is_diagonal())
    }
}

fn fmt_eig(v: f64) -> String {
    format!("{}", (v * 1e6).round() / 1e6)
}

/// Per-layer input covariances `(B1, B2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSplit {
    pub b1: SymMatrix,
    pub b2: SymMatrix,
}

impl PowerSplit {
    pub fn new(b1: SymMatrix, b2: SymMatrix) -> Result<Self> {
        b1.check_dim(&b2)?;
        Ok(Self { b1, b2 })
    }

    pub fn zero(t: usize) -> Self {
        Self { b1: SymMatrix::zeros(t), b2: SymMatrix::zeros(t) }
    }

    pub fn total(&self) -> SymMatrix {
        &self.b1 + &self.b2
    }

    pub fn dim(&self) -> usize {
        self.b1.dim()
    }

    /// A seeded random feasible split `Bk = S^½ Yk S^½` with `Y1, Y2 ⪰ 0`,
    /// `Y1 + Y2 ⪯ I`; strictly interior whenever `S ≻ 0`.
    pub fn random_feasible<R: rand::Rng>(ch: &Sadbc, rng: &mut R) -> PowerSplit {
        let y = PowerSplit::random_unit(ch.dim(), rng);
        let root = ch.s().psd_sqrt().expect("S is PSD");
        PowerSplit {
            b1: y.b1.congruence(root.as_matrix()),
            b2: y.b2.congruence(root.as_matrix()),
        }
    }

    /// Random `(Y1, Y2)` with `Y1, Y2 ⪰ 0` and `Y1 + Y2 ≺ I`.
    pub(crate) fn random_unit<R: rand::Rng>(t: usize, rng: &mut R) -> PowerSplit {
        let wishart = |rng: &mut R| {
            let g = DMatrix::<f64>::from_fn(t, t, |_, _| StandardNormal.sample(rng));
            let w = SymMatrix::symmetrized(&g * g.transpose());
            let top = w.eigen().max_abs().max(f64::MIN_POSITIVE);
            w.scale(1.0 / top)
        };
        let u1: f64 = rng.random_range(0.05..0.95);
        let y1 = wishart(rng).scale(u1);
        let room = (&SymMatrix::identity(t) - &y1).psd_sqrt().expect("I - Y1 is PSD");
        let u2: f64 = rng.random_range(0.05..0.95);
        let y2 = wishart(rng).congruence(room.as_matrix()).scale(u2);
        PowerSplit { b1: y1, b2: y2 }
    }

    pub(crate) fn diff(&self, other: &PowerSplit) -> PowerSplit {
        PowerSplit { b1: &self.b1 - &other.b1, b2: &self.b2 - &other.b2 }
    }

    pub(crate) fn dot(&self, other: &PowerSplit) -> f64 {
        self.b1.dot(&other.b1) + self.b2.dot(&other.b2)
    }

    pub(crate) fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    fn check_against(&self, ch: &Sadbc) -> Result<()> {
        self.b1.check_dim(&self.b2)?;
        ch.s().check_dim(&self.b1)
    }

    /// `B1 ⪰ 0`, `B2 ⪰ 0` and `B1 + B2 ⪯ S`, each at relative tolerance `tol`.
    pub fn feasible(&self, ch: &Sadbc, tol: f64) -> Result<bool> {
        self.check_against(ch)?;
        Ok(self.b1.is_psd(tol) && self.b2.is_psd(tol) && self.total().psd_leq(ch.s(), tol)?)
    }

    /// Dykstra alternating projection onto `{B1 ⪰ 0} ∩ {B2 ⪰ 0} ∩ {B1 + B2 ⪯ S}`,
    /// carried out in coordinates whitened by `S`. Feasible input is returned unchanged.
    pub fn clamp_to_feasible(&self, ch: &Sadbc) -> Result<PowerSplit> {
        self.check_against(ch)?;
        let out = project_feasible(self, ch.s(), false);
        if out.converged {
            Ok(out.split)
        } else {
            Err(Error::ProjectionFailed { gap: out.gap })
        }
    }
}

pub(crate) struct Projection {
    pub split: PowerSplit,
    pub converged: bool,
    pub gap: f64,
}

/// Congruence `B ↦ W ᵀ B W` onto the range of `S`, under which the
/// constraint `B1 + B2 ⪯ S` becomes `Y1 + Y2 ⪯ I`. The map back is
/// `Y ↦ R Y Rᵀ`, `R R ᵀ = S`.
#[derive(Debug, Clone)]
pub(crate) struct Whitening {
    root: DMatrix<f64>,
    inv_root: DMatrix<f64>,
}

impl Whitening {
    pub fn new(s: &SymMatrix) -> Self {
        let e = s.eigen();
        let cutoff = 1e-12 * e.max_abs();
        let keep: Vec<usize> = (0..e.values.len())
            .filter(|&k| e.values[k] > cutoff && e.values[k] > 0.0)
            .collect();
        let t = s.dim();
        let root = DMatrix::from_fn(t, keep.len(), |i, j| {
            e.vectors[(i, keep[j])] * e.values[keep[j]].sqrt()
        });
        let inv_root = DMatrix::from_fn(t, keep.len(), |i, j| {
            e.vectors[(i, keep[j])] / e.values[keep[j]].sqrt()
        });
        Self { root, inv_root }
    }

    /// Rank of `S`; zero means the only feasible split is `(0, 0)`.
    pub fn rank(&self) -> usize {
        self.root.ncols()
    }

    pub fn to_unit(&self, b: &SymMatrix) -> SymMatrix {
        SymMatrix::symmetrized(self.inv_root.transpose() * b.as_matrix() * &self.inv_root)
    }

    pub fn from_unit(&self, y: &SymMatrix) -> SymMatrix {
        SymMatrix::symmetrized(&self.root * y.as_matrix() * self.root.transpose())
    }

    /// Pull a gradient with respect to `B` back to the whitened variable.
    pub fn pull_back(&self, g: &SymMatrix) -> SymMatrix {
        SymMatrix::symmetrized(self.root.transpose() * g.as_matrix() * &self.root)
    }

    pub fn split_to_unit(&self, x: &PowerSplit) -> PowerSplit {
        PowerSplit { b1: self.to_unit(&x.b1), b2: self.to_unit(&x.b2) }
    }

    pub fn split_from_unit(&self, y: &PowerSplit) -> PowerSplit {
        PowerSplit { b1: self.from_unit(&y.b1), b2: self.from_unit(&y.b2) }
    }
}

fn exactly_feasible_unit(y: &PowerSplit, pin_b2: bool) -> bool {
    if pin_b2 && y.b2.frobenius_norm() != 0.0 {
        return false;
    }
    let r = y.dim();
    y.b1.min_eigenvalue() >= 0.0
        && (pin_b2 || y.b2.min_eigenvalue() >= 0.0)
        && (&SymMatrix::identity(r) - &y.total()).min_eigenvalue() >= 0.0
}

/// Dykstra projection onto `{Y1 ⪰ 0} ∩ {Y2 ⪰ 0} ∩ {Y1 + Y2 ⪯ I}`. With
/// `pin_b2` the second block is held at zero and `0 ⪯ Y1 ⪯ I` is solved
/// exactly by clamping eigenvalues to `[0, 1]`.
pub(crate) fn project_unit(start: &PowerSplit, pin_b2: bool) -> Projection {
    let r = start.dim();
    if pin_b2 {
        let e = start.b1.eigen();
        let b1 = if e.min() >= 0.0 && e.values[r - 1] <= 1.0 {
            start.b1.clone()
        } else {
            e.recompose(|l| l.clamp(0.0, 1.0))
        };
        return Projection { split: PowerSplit { b1, b2: SymMatrix::zeros(r) }, converged: true, gap: 0.0 };
    }
    let mut x = start.clone();
    if exactly_feasible_unit(&x, false) {
        return Projection { split: x, converged: true, gap: 0.0 };
    }

    let eye = SymMatrix::identity(r);
    let mut incr: Vec<PowerSplit> = (0..3).map(|_| PowerSplit::zero(r)).collect();
    let tol = CLAMP_GAP_TOL * (1.0 + start.norm());
    let mut gap = f64::INFINITY;
    let mut converged = false;

    for _ in 0..CLAMP_MAX_SWEEPS {
        let before = x.clone();
        for (k, p) in incr.iter_mut().enumerate() {
            let y = PowerSplit { b1: &x.b1 + &p.b1, b2: &x.b2 + &p.b2 };
            let projected = match k {
                0 => PowerSplit { b1: y.b1.project_psd(), b2: y.b2.clone() },
                1 => PowerSplit { b1: y.b1.clone(), b2: y.b2.project_psd() },
                _ => {
                    let excess = (&y.total() - &eye).project_psd().scale(0.5);
                    PowerSplit { b1: &y.b1 - &excess, b2: &y.b2 - &excess }
                }
            };
            *p = y.diff(&projected);
            x = projected;
        }
        gap = x.diff(&before).norm();
        if gap < tol {
            converged = true;
            break;
        }
    }
    Projection { split: finish_unit(x), converged, gap }
}

/// Dykstra stops within its gap tolerance of the feasible set; clamp both
/// blocks to the PSD cone and shrink onto `Y1 + Y2 ⪯ I` so the result is
/// feasible up to rounding.
fn finish_unit(x: PowerSplit) -> PowerSplit {
    let y1 = x.b1.project_psd();
    let y2 = x.b2.project_psd();
    let top = (&y1 + &y2).eigen().values.last().copied().unwrap_or(0.0);
    if top > 1.0 {
        PowerSplit { b1: y1.scale(1.0 / top), b2: y2.scale(1.0 / top) }
    } else {
        PowerSplit { b1: y1, b2: y2 }
    }
}

/// Project in the coordinates whitened by `S`; components outside the range
/// of `S` are dropped since no feasible split has them.
pub(crate) fn project_feasible(start: &PowerSplit, s: &SymMatrix, pin_b2: bool) -> Projection {
    let t = s.dim();
    let pinned_ok = !pin_b2 || start.b2.frobenius_norm() == 0.0;
    if pinned_ok
        && start.b1.min_eigenvalue() >= 0.0
        && (pin_b2 || start.b2.min_eigenvalue() >= 0.0)
        && (s - &start.total()).min_eigenvalue() >= 0.0
    {
        return Projection { split: start.clone(), converged: true, gap: 0.0 };
    }
    let white = Whitening::new(s);
    if white.rank() == 0 {
        return Projection { split: PowerSplit::zero(t), converged: true, gap: 0.0 };
    }
    let unit = project_unit(&white.split_to_unit(start), pin_b2);
    let mut split = white.split_from_unit(&unit.split);
    if pin_b2 {
        split.b2 = SymMatrix::zeros(t);
    }
    Projection { split, converged: unit.converged, gap: unit.gap }
}
