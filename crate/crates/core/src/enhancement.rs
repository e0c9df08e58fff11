//! Enhanced channel built from the multipliers at a solved point, and the
//! checks that certify it.
//!
//! ```text
//! N1′ = (N1⁻¹ + O1)⁻¹
//! N2′ = ((B1 + N2)⁻¹ + O2/μ)⁻¹ − B1
//! N3′ = N3
//! A   = (N2′ − N1′)(N3′ − N1′)⁻¹,   α = 1/(μ − 1)
//! ```
//!
//! Proportionality `(I − A)(B1 + N1′) = αA(B1 + N3′)` and the entropy-power
//! equality are evaluated with `A` as computed. That matrix equals
//! `(B1+N1′)(B1+N1′ + α(B1+N3′))⁻¹` whenever the enhanced stationarity
//! identity holds, and it is not symmetric in general; its symmetric part and
//! asymmetry are kept alongside for reporting.

use nalgebra::DMatrix;

use crate::channel::{PowerSplit, Sadbc};
use crate::error::{Error, Result};
use crate::matrix::SymMatrix;
use crate::nats_to_bits;
use crate::rates::{rates_nats, Noises};
use crate::solver::KktCertificate;

/// Relative eigenvalue cut below which `N3′ − N1′` counts as singular.
pub const DIFFERENCE_SINGULAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DifferenceStatus {
    Regular,
    /// `N3′ − N1′` is singular; `A` uses its pseudo-inverse on the range.
    PartiallySingular,
    /// `N3′ = N1′`: no wiretap advantage anywhere, `A = 0`, and the
    /// proportionality identity is vacuous.
    Vanishing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnhancedSadbc {
    pub base: Sadbc,
    pub n1p: SymMatrix,
    pub n2p: SymMatrix,
    pub n3p: SymMatrix,
    /// `(N2′ − N1′)(N3′ − N1′)⁺` as computed.
    pub a_raw: DMatrix<f64>,
    /// Symmetric part of `a_raw`.
    pub a: SymMatrix,
    /// `‖a_raw − a_rawᵀ‖_F`
    pub asymmetry_of_a: f64,
    pub alpha: f64,
    pub mu: f64,
    pub difference_status: DifferenceStatus,
    /// Orthogonal projector onto the range of `N3′ − N1′`.
    range: DMatrix<f64>,
}

fn is_zero(m: &SymMatrix) -> bool {
    m.as_matrix().iter().all(|v| *v == 0.0)
}

/// Build the enhanced channel. Zero multipliers leave the noises untouched.
pub fn construct_enhanced(ch: &Sadbc, split: &PowerSplit, cert: &KktCertificate, mu: f64) -> Result<EnhancedSadbc> {
    if !(mu.is_finite() && mu > 1.0) {
        return Err(Error::MuOutOfDomain(mu));
    }
    for (name, o) in [("O1", &cert.o1), ("O2", &cert.o2)] {
        o.check_dim(ch.s())?;
        if !o.is_psd(1e-8) {
            return Err(Error::InvalidInput(format!("multiplier {name} is not PSD")));
        }
    }
    let t = ch.dim();
    let n1p = if is_zero(&cert.o1) {
        ch.n1().clone()
    } else {
        (&ch.n1().inverse()? + &cert.o1).inverse()?
    };
    let n2p = if is_zero(&cert.o2) {
        ch.n2().clone()
    } else {
        let inner = &(&split.b1 + ch.n2()).inverse()? + &cert.o2.scale(1.0 / mu);
        &inner.inverse()? - &split.b1
    };
    let n3p = ch.n3().clone();

    let diff = (&n3p - &n1p).eigen();
    let cut = DIFFERENCE_SINGULAR_TOL * ch.scale();
    let kept: Vec<usize> = (0..t).filter(|&k| diff.values[k] > cut).collect();
    let difference_status = match kept.len() {
        0 => DifferenceStatus::Vanishing,
        k if k < t => DifferenceStatus::PartiallySingular,
        _ => DifferenceStatus::Regular,
    };
    let mut pinv = DMatrix::<f64>::zeros(t, t);
    let mut range = DMatrix::<f64>::zeros(t, t);
    for &k in &kept {
        let v = diff.vectors.column(k);
        pinv += (1.0 / diff.values[k]) * v * v.transpose();
        range += v * v.transpose();
    }
    let a_raw = (&n2p - &n1p).as_matrix() * pinv;
    let a = SymMatrix::symmetrized(a_raw.clone());
    let asymmetry_of_a = (&a_raw - a_raw.transpose()).norm();

    Ok(EnhancedSadbc {
        base: ch.clone(),
        n1p,
        n2p,
        n3p,
        a_raw,
        a,
        asymmetry_of_a,
        alpha: 1.0 / (mu - 1.0),
        mu,
        difference_status,
        range,
    })
}

impl EnhancedSadbc {
    fn noises(&self) -> Noises<'_> {
        Noises { n1: &self.n1p, n2: &self.n2p, n3: &self.n3p }
    }

    /// Minimum eigenvalues of `N1 − N1′`, `N2 − N2′`, `N3 − N3′`, `N2′ − N1′`.
    pub fn ordering_margins(&self) -> [f64; 4] {
        [
            (self.base.n1() - &self.n1p).min_eigenvalue(),
            (self.base.n2() - &self.n2p).min_eigenvalue(),
            (self.base.n3() - &self.n3p).min_eigenvalue(),
            (&self.n2p - &self.n1p).min_eigenvalue(),
        ]
    }

    /// All four orderings hold with margin `−tol·scale`.
    pub fn ordering_holds(&self, tol: f64) -> bool {
        let floor = -tol * self.base.scale();
        self.ordering_margins().iter().all(|m| *m >= floor)
    }
}

/// `‖(I−A)(B1+N1′) − αA(B1+N3′)‖_F / (1 + ‖B1+N3′‖_F)`, restricted to the
/// range of `N3′ − N1′` (the whole space unless the difference is singular).
pub fn check_proportionality(enh: &EnhancedSadbc, split: &PowerSplit) -> f64 {
    let t = enh.n1p.dim();
    let p = (&split.b1 + &enh.n1p).into_matrix();
    let q = &split.b1 + &enh.n3p;
    let eye = DMatrix::<f64>::identity(t, t);
    let e = (&eye - &enh.a_raw) * &p - enh.alpha * &enh.a_raw * q.as_matrix();
    let e = &enh.range * e * &enh.range;
    e.norm() / (1.0 + q.frobenius_norm())
}

/// `(|ΔR1|, |ΔR2|)` in bits between the original and the enhanced channel.
pub fn check_rate_preservation(ch: &Sadbc, enh: &EnhancedSadbc, split: &PowerSplit) -> Result<(f64, f64)> {
    let (a1, a2) = rates_nats(split, Noises::of(ch))?;
    let (b1, b2) = rates_nats(split, enh.noises())?;
    Ok((nats_to_bits((a1 - b1).abs()), nats_to_bits((a2 - b2).abs())))
}

/// Relative residual of `(B1+N1′)⁻¹ + (μ−1)(B1+N3′)⁻¹ = μ(B1+N2′)⁻¹`,
/// normalized by `1 + ‖μ(B1+N2′)⁻¹‖_F`.
pub fn check_enhanced_kkt(enh: &EnhancedSadbc, split: &PowerSplit) -> Result<f64> {
    let mu = enh.mu;
    let left = &(&split.b1 + &enh.n1p).inverse()? + &(&split.b1 + &enh.n3p).inverse()?.scale(mu - 1.0);
    let right = (&split.b1 + &enh.n2p).inverse()?.scale(mu);
    Ok((&left - &right).frobenius_norm() / (1.0 + right.frobenius_norm()))
}

/// Both sides of the Gaussian entropy-power equality, in nats:
///
/// ```text
/// lhs = ½ln|B1+N2′| − ½ln|B1+N3′|
/// rhs = (t/2)·ln(|I−A|^(1/t)·exp((2/t)·d13) + |A|^(1/t)),   d13 = ½ln|B1+N1′| − ½ln|B1+N3′|
/// ```
pub fn check_epi_equality(enh: &EnhancedSadbc, split: &PowerSplit) -> Result<(f64, f64)> {
    let t = enh.n1p.dim();
    let tf = t as f64;
    let q = (&split.b1 + &enh.n3p).log_det()?;
    let lhs = 0.5 * (&split.b1 + &enh.n2p).log_det()? - 0.5 * q;
    let d13 = 0.5 * (&split.b1 + &enh.n1p).log_det()? - 0.5 * q;

    let det_a = enh.a_raw.clone().lu().determinant();
    let det_ia = (DMatrix::<f64>::identity(t, t) - &enh.a_raw).lu().determinant();
    if det_ia < 0.0 {
        return Err(Error::ComplexBranch { which: "I − A", det: det_ia });
    }
    if det_a < 0.0 {
        return Err(Error::ComplexBranch { which: "A", det: det_a });
    }
    let rhs = 0.5 * tf * (det_ia.powf(1.0 / tf) * (2.0 * d13 / tf).exp() + det_a.powf(1.0 / tf)).ln();
    Ok((lhs, rhs))
}

/// Pass thresholds for [`verify_enhancement`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Ordering margin, relative to the channel scale.
    pub feas_tol: f64,
    /// Proportionality, enhanced stationarity and entropy-power gap.
    pub verify_tol: f64,
    /// Rate preservation, bits.
    pub rate_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { feas_tol: 1e-8, verify_tol: 1e-6, rate_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnhancementReport {
    pub enhanced: EnhancedSadbc,
    pub ordering_margins: [f64; 4],
    pub ordering_ok: bool,
    pub proportionality: f64,
    pub proportionality_ok: bool,
    pub rate_deltas_bits: (f64, f64),
    pub rates_ok: bool,
    pub enhanced_kkt: f64,
    pub enhanced_kkt_ok: bool,
    /// `(lhs, rhs)` in bits, or the reason the expression could not be evaluated.
    pub epi_bits: std::result::Result<(f64, f64), String>,
    pub epi_ok: bool,
}

impl EnhancementReport {
    pub fn all_ok(&self) -> bool {
        self.ordering_ok && self.proportionality_ok && self.rates_ok && self.enhanced_kkt_ok && self.epi_ok
    }
}

/// Construct the enhanced channel and run every check against `tol`.
pub fn verify_enhancement(
    ch: &Sadbc,
    split: &PowerSplit,
    cert: &KktCertificate,
    mu: f64,
    tol: &Tolerances,
) -> Result<EnhancementReport> {
    let enhanced = construct_enhanced(ch, split, cert, mu)?;
    let ordering_margins = enhanced.ordering_margins();
    let proportionality = check_proportionality(&enhanced, split);
    let rate_deltas_bits = check_rate_preservation(ch, &enhanced, split)?;
    let enhanced_kkt = check_enhanced_kkt(&enhanced, split)?;
    let epi_bits = check_epi_equality(&enhanced, split)
        .map(|(l, r)| (nats_to_bits(l), nats_to_bits(r)))
        .map_err(|e| e.to_string());
    let epi_ok = match &epi_bits {
        // the tolerance is stated in nats; compare on that scale
        Ok((l, r)) => (l - r).abs() * std::f64::consts::LN_2 <= tol.verify_tol,
        Err(_) => false,
    };
    Ok(EnhancementReport {
        ordering_ok: enhanced.ordering_holds(tol.feas_tol),
        ordering_margins,
        proportionality_ok: proportionality <= tol.verify_tol,
        proportionality,
        rates_ok: rate_deltas_bits.0 <= tol.rate_tol && rate_deltas_bits.1 <= tol.rate_tol,
        rate_deltas_bits,
        enhanced_kkt_ok: enhanced_kkt <= tol.verify_tol,
        enhanced_kkt,
        epi_bits,
        epi_ok,
        enhanced,
    })
}
