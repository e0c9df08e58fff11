//! Dense real symmetric matrices and PSD-cone predicates.
//!
//! Every matrix is symmetrized on construction, so `m[(i, j)] == m[(j, i)]`
//! holds bit-for-bit. Eigendecompositions use cyclic Jacobi rotations; the
//! matrices handled here are small (t ≤ 16), where Jacobi is accurate to a few
//! ulps in every eigenvalue. Log-determinants and inverses go through a
//! Cholesky factorization, which doubles as the positive-definiteness test.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default relative tolerance for PSD predicates that take no explicit tolerance.
pub const PSD_TOL: f64 = 1e-9;

const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    m: DMatrix<f64>,
}

/// Eigenpairs of a symmetric matrix, eigenvalues ascending. Column `k` of
/// `vectors` belongs to `values[k]`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    /// Rebuild `V f(Λ) Vᵀ`.
    pub fn recompose(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.values.len();
        let mut out = DMatrix::zeros(n, n);
        for (k, &lambda) in self.values.iter().enumerate() {
            let w = f(lambda);
            if w == 0.0 {
                continue;
            }
            let v = self.vectors.column(k);
            out += w * v * v.transpose();
        }
        SymMatrix::symmetrized(out)
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Orthonormal basis (as columns) of the eigenvectors whose eigenvalue is below `threshold`.
    pub fn basis_below(&self, threshold: f64) -> DMatrix<f64> {
        let cols: Vec<usize> = (0..self.values.len())
            .filter(|&k| self.values[k] < threshold)
            .collect();
        let n = self.values.len();
        DMatrix::from_fn(n, cols.len(), |i, j| self.vectors[(i, cols[j])])
    }
}

impl SymMatrix {
    /// Wrap a square matrix, replacing it with `(M + Mᵀ)/2`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidInput(format!(
                "matrix is {}x{}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidInput("matrix dimension must be at least 1".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        Ok(Self::symmetrized(m))
    }

    pub(crate) fn symmetrized(m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut out = m;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Self { m: out }
    }

    pub fn from_row_major(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::InvalidInput(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn identity(dim: usize) -> Self {
        Self { m: DMatrix::identity(dim, dim) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { m: DMatrix::zeros(dim, dim) }
    }

    pub fn diag(values: &[f64]) -> Self {
        Self { m: DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(values)) }
    }

    pub fn scalar(v: f64) -> Self {
        Self::diag(&[v])
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let n = self.dim();
        (0..n * n).map(|k| self.m[(k / n, k % n)]).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.m[(i, j)] == 0.0))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    /// `Tr{self · other}` for symmetric arguments.
    pub fn trace_product(&self, other: &SymMatrix) -> f64 {
        self.m.component_mul(&other.m).sum()
    }

    /// Frobenius inner product; identical to [`trace_product`](Self::trace_product).
    pub fn dot(&self, other: &SymMatrix) -> f64 {
        self.trace_product(other)
    }

    /// `T · self · Tᵀ`.
    pub fn congruence(&self, t: &DMatrix<f64>) -> SymMatrix {
        Self::symmetrized(t * &self.m * t.transpose())
    }

    pub fn eigen(&self) -> SymEigen {
        jacobi_eigen(&self.m)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().min()
    }

    /// `true` iff `λ_min ≥ −tol·(1 + max|λ|)`.
    pub fn is_psd(&self, tol: f64) -> bool {
        debug_assert!(tol >= 0.0);
        let e = self.eigen();
        e.min() >= -tol * (1.0 + e.max_abs())
    }

    /// `self ⪯ other` in the Loewner order.
    pub fn psd_leq(&self, other: &SymMatrix, tol: f64) -> Result<bool> {
        self.check_dim(other)?;
        Ok((other - self).is_psd(tol))
    }

    /// Natural log of the determinant of a positive definite matrix.
    pub fn log_det(&self) -> Result<f64> {
        let chol = self.m.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        let l = chol.l_dirty();
        Ok(2.0 * (0..self.dim()).map(|i| l[(i, i)].ln()).sum::<f64>())
    }

    /// `ln|self + delta| − ln|self|` for positive definite `self`, computed as
    /// `Σ ln(1 + λ)` over the eigenvalues of `L⁻¹ delta L⁻ᵀ`, which stays
    /// accurate when `delta` is tiny.
    pub fn log_det_ratio(&self, delta: &SymMatrix) -> Result<f64> {
        self.check_dim(delta)?;
        let chol = self.m.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        let l = chol.l();
        let x = l.solve_lower_triangular(&delta.m).ok_or(Error::NotPositiveDefinite)?;
        let c = l.solve_lower_triangular(&x.transpose()).ok_or(Error::NotPositiveDefinite)?;
        let e = jacobi_eigen(&Self::symmetrized(c).m);
        if e.min() <= -1.0 {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(e.values.iter().map(|v| v.ln_1p()).sum())
    }

    pub fn inverse(&self) -> Result<SymMatrix> {
        let chol = self.m.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        Ok(Self::symmetrized(chol.inverse()))
    }

    /// Principal square root of a PSD matrix. Eigenvalues within the
    /// [`PSD_TOL`] band below zero are treated as zero.
    pub fn psd_sqrt(&self) -> Result<SymMatrix> {
        let e = self.eigen();
        if e.min() < -PSD_TOL * (1.0 + e.max_abs()) {
            return Err(Error::Indefinite { min_eig: e.min() });
        }
        Ok(e.recompose(|l| l.max(0.0).sqrt()))
    }

    /// Nearest PSD matrix in Frobenius norm.
    pub fn project_psd(&self) -> SymMatrix {
        let e = self.eigen();
        if e.min() >= 0.0 {
            return self.clone();
        }
        e.recompose(|l| l.max(0.0))
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        Self { m: &self.m * c }
    }

    pub(crate) fn check_dim(&self, other: &SymMatrix) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(())
    }
}

fn jacobi_eigen(a: &DMatrix<f64>) -> SymEigen {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let total = a.norm();

    if total > 0.0 {
        for _ in 0..JACOBI_MAX_SWEEPS {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[(p, q)] * a[(p, q)];
                }
            }
            if off.sqrt() <= 1e-17 * total {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t = if theta.abs() > 1e150 {
                        0.5 / theta
                    } else {
                        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                    };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    SymEigen { values, vectors }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix { m: &self.m + &rhs.m }
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix { m: &self.m - &rhs.m }
    }
}

impl Add for SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: SymMatrix) -> SymMatrix {
        SymMatrix { m: self.m + rhs.m }
    }
}

impl Sub for SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: SymMatrix) -> SymMatrix {
        SymMatrix { m: self.m - rhs.m }
    }
}

impl Neg for &SymMatrix {
    type Output = SymMatrix;
    fn neg(self) -> SymMatrix {
        SymMatrix { m: -&self.m }
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        self.scale(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m2(a: f64, b: f64, c: f64) -> SymMatrix {
        SymMatrix::from_row_major(2, &[a, b, b, c]).unwrap()
    }

    fn close(a: &SymMatrix, b: &SymMatrix, tol: f64) -> bool {
        (a - b).frobenius_norm() <= tol
    }

    #[test]
    fn symmetrizes_on_construction() {
        let m = SymMatrix::from_row_major(2, &[1.0, 2.0, 4.0, 1.0]).unwrap();
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 0), 3.0);
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(SymMatrix::from_row_major(2, &[1.0, 2.0, 3.0]).is_err());
        assert!(SymMatrix::from_row_major(1, &[f64::NAN]).is_err());
        assert!(SymMatrix::from_row_major(0, &[]).is_err());
    }

    #[test]
    fn psd_predicate() {
        assert!(SymMatrix::identity(2).is_psd(1e-9));
        assert!(!SymMatrix::diag(&[1.0, -0.5]).is_psd(1e-9));
        assert!(m2(1.0, 2.0, 4.0).is_psd(1e-9));
    }

    #[test]
    fn loewner_order() {
        let a = m2(1.0, 0.3, 2.0);
        assert!(a.psd_leq(&a, 1e-9).unwrap());
        assert!(SymMatrix::diag(&[1.0, 1.0]).psd_leq(&SymMatrix::diag(&[2.0, 3.0]), 1e-9).unwrap());
        assert!(!SymMatrix::diag(&[2.0, 1.0]).psd_leq(&SymMatrix::diag(&[1.0, 2.0]), 1e-9).unwrap());
        assert!(matches!(
            SymMatrix::identity(2).psd_leq(&SymMatrix::identity(3), 1e-9),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn log_det_values() {
        assert_eq!(SymMatrix::identity(3).log_det().unwrap(), 0.0);
        assert!((SymMatrix::diag(&[2.0, 3.0]).log_det().unwrap() - 6f64.ln()).abs() < 1e-14);
        assert!((m2(2.0, 1.0, 2.0).log_det().unwrap() - 3f64.ln()).abs() < 1e-14);
        assert!(matches!(SymMatrix::diag(&[1.0, -1.0]).log_det(), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn log_det_ratio_values() {
        let a = m2(2.0, 1.0, 2.0);
        let d = m2(0.5, -0.2, 0.1);
        let want = (&a + &d).log_det().unwrap() - a.log_det().unwrap();
        assert!((a.log_det_ratio(&d).unwrap() - want).abs() < 1e-14);
        // tiny perturbation: first order term Tr(A⁻¹ D) dominates
        let tiny = d.scale(1e-13);
        let first = a.inverse().unwrap().trace_product(&tiny);
        assert!((a.log_det_ratio(&tiny).unwrap() - first).abs() < 1e-12 * first.abs());
        assert!(a.log_det_ratio(&a.scale(-1.0)).is_err());
    }

    #[test]
    fn inverse_values() {
        assert!(close(&SymMatrix::identity(2).inverse().unwrap(), &SymMatrix::identity(2), 1e-15));
        assert!(close(
            &SymMatrix::diag(&[2.0, 4.0]).inverse().unwrap(),
            &SymMatrix::diag(&[0.5, 0.25]),
            1e-15
        ));
        let inv = m2(2.0, 1.0, 2.0).inverse().unwrap();
        assert!(close(&inv, &m2(2.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0), 1e-14));
        assert!(SymMatrix::zeros(2).inverse().is_err());
    }

    #[test]
    fn sqrt_values() {
        assert!(close(&SymMatrix::identity(2).psd_sqrt().unwrap(), &SymMatrix::identity(2), 1e-15));
        assert!(close(
            &SymMatrix::diag(&[4.0, 9.0]).psd_sqrt().unwrap(),
            &SymMatrix::diag(&[2.0, 3.0]),
            1e-14
        ));
        assert_eq!(SymMatrix::zeros(2).psd_sqrt().unwrap(), SymMatrix::zeros(2));
        assert!(matches!(SymMatrix::diag(&[1.0, -1.0]).psd_sqrt(), Err(Error::Indefinite { .. })));
    }

    #[test]
    fn projection_values() {
        assert!(close(&SymMatrix::diag(&[1.0, -2.0]).project_psd(), &SymMatrix::diag(&[1.0, 0.0]), 1e-15));
        let p = m2(2.0, 1.0, 3.0);
        assert!(close(&p.project_psd(), &p, 1e-12));
        assert!(close(&(-&SymMatrix::identity(2)).project_psd(), &SymMatrix::zeros(2), 1e-15));
    }

    #[test]
    fn jacobi_reconstructs() {
        let m = SymMatrix::from_row_major(3, &[4.0, 1.0, -2.0, 1.0, 2.0, 0.5, -2.0, 0.5, 3.0]).unwrap();
        let e = m.eigen();
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        assert!(close(&e.recompose(|l| l), &m, 1e-13));
        let vtv = e.vectors.transpose() * &e.vectors;
        assert!((vtv - DMatrix::identity(3, 3)).norm() < 1e-14);
    }

    fn random_psd(seed: &[f64], t: usize) -> SymMatrix {
        let g = DMatrix::from_row_slice(t, t, &seed[..t * t]);
        SymMatrix::new(&g * g.transpose()).unwrap()
    }

    fn random_pd(seed: &[f64], t: usize) -> SymMatrix {
        &random_psd(seed, t) + &SymMatrix::identity(t).scale(0.1)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn loewner_order_is_reflexive_and_transitive(
            t in 1usize..4,
            ga in proptest::collection::vec(-2.0f64..2.0, 9),
            gb in proptest::collection::vec(-2.0f64..2.0, 9),
            gc in proptest::collection::vec(-2.0f64..2.0, 9),
        ) {
            let a = random_psd(&ga, t);
            let b = &a + &random_psd(&gb, t);
            let c = &b + &random_psd(&gc, t);
            prop_assert!(a.psd_leq(&a, 1e-9).unwrap());
            prop_assert!(a.psd_leq(&b, 1e-9).unwrap());
            prop_assert!(b.psd_leq(&c, 1e-9).unwrap());
            prop_assert!(a.psd_leq(&c, 1e-9).unwrap());
        }

        #[test]
        fn log_det_scales(t in 1usize..5, g in proptest::collection::vec(-2.0f64..2.0, 16), c in 0.01f64..100.0) {
            let m = random_pd(&g, t);
            let lhs = m.scale(c).log_det().unwrap();
            let rhs = t as f64 * c.ln() + m.log_det().unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
        }

        #[test]
        fn projection_is_idempotent(t in 1usize..5, g in proptest::collection::vec(-3.0f64..3.0, 16)) {
            let m = SymMatrix::from_row_major(t, &g[..t * t]).unwrap();
            let p = m.project_psd();
            prop_assert!(close(&p.project_psd(), &p, 1e-12 * (1.0 + p.frobenius_norm())));
        }

        #[test]
        fn double_inverse_is_identity(t in 1usize..5, g in proptest::collection::vec(-2.0f64..2.0, 16)) {
            let m = random_pd(&g, t);
            let back = m.inverse().unwrap().inverse().unwrap();
            prop_assert!((&back - &m).frobenius_norm() <= 1e-9 * m.frobenius_norm());
            let prod = m.as_matrix() * m.inverse().unwrap().as_matrix();
            prop_assert!((prod - DMatrix::identity(t, t)).norm() <= 1e-10 * t as f64);
        }

        #[test]
        fn sqrt_squares_back(t in 1usize..5, g in proptest::collection::vec(-2.0f64..2.0, 16)) {
            let m = random_psd(&g, t);
            let r = m.psd_sqrt().unwrap();
            prop_assert!(r.is_psd(1e-9));
            let sq = r.as_matrix() * r.as_matrix();
            prop_assert!((sq - m.as_matrix()).norm() <= 1e-9 * (1.0 + m.frobenius_norm()));
        }
    }
}
