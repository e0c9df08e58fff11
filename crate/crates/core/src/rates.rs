//! Gaussian secret-superposition rates, the weighted objective and its gradient.
//!
//! All quantities here are in nats; [`RatePair`] carries bits.
//!
//! ```text
//! R1 = ½ln|B1+N1| − ½ln|N1| − ½ln|B1+N3| + ½ln|N3|
//! R2 = ½ln|B+N2| − ½ln|B1+N2| − ½ln|B+N3| + ½ln|B1+N3|,   B = B1 + B2
//! ```

use crate::channel::{PowerSplit, Sadbc};
use crate::error::{Error, Result};
use crate::matrix::SymMatrix;
use crate::nats_to_bits;

/// Feasibility tolerance used for rate-evaluation preconditions.
pub const RATE_FEAS_TOL: f64 = 1e-8;

/// Secrecy rate pair in bits per channel use. Raw values are kept; a value
/// like `-1e-16` is only clamped when written out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePair {
    pub r1_bits: f64,
    pub r2_bits: f64,
    pub mu: Option<f64>,
}

impl RatePair {
    pub fn clamped(&self) -> (f64, f64) {
        (self.r1_bits.max(0.0), self.r2_bits.max(0.0))
    }
}

/// Noise triple the rate expressions are evaluated against.
#[derive(Clone, Copy)]
pub(crate) struct Noises<'a> {
    pub n1: &'a SymMatrix,
    pub n2: &'a SymMatrix,
    pub n3: &'a SymMatrix,
}

impl<'a> Noises<'a> {
    pub fn of(ch: &'a Sadbc) -> Self {
        Self { n1: ch.n1(), n2: ch.n2(), n3: ch.n3() }
    }
}

pub(crate) fn rates_nats(split: &PowerSplit, n: Noises<'_>) -> Result<(f64, f64)> {
    let b = split.total();
    let r1 = 0.5
        * ((&split.b1 + n.n1).log_det()? - n.n1.log_det()? - (&split.b1 + n.n3).log_det()?
            + n.n3.log_det()?);
    let r2 = 0.5
        * ((&b + n.n2).log_det()? - (&split.b1 + n.n2).log_det()? - (&b + n.n3).log_det()?
            + (&split.b1 + n.n3).log_det()?);
    Ok((r1, r2))
}

/// `w1·R1 + w2·R2` in nats.
pub(crate) fn objective_nats(split: &PowerSplit, n: Noises<'_>, w: (f64, f64)) -> Result<f64> {
    let (r1, r2) = rates_nats(split, n)?;
    Ok(w.0 * r1 + w.1 * r2)
}

/// `f(to) − f(from)` for `f = w1·R1 + w2·R2`, evaluated term by term from
/// log-det ratios so that small gains are not lost to cancellation.
pub(crate) fn objective_gain(from: &PowerSplit, to: &PowerSplit, n: Noises<'_>, w: (f64, f64)) -> Result<f64> {
    let b = from.total();
    let d1 = &to.b1 - &from.b1;
    let d = &to.total() - &b;
    let g1 = 0.5 * ((&from.b1 + n.n1).log_det_ratio(&d1)? - (&from.b1 + n.n3).log_det_ratio(&d1)?);
    let g2 = 0.5
        * ((&b + n.n2).log_det_ratio(&d)? - (&from.b1 + n.n2).log_det_ratio(&d1)?
            - (&b + n.n3).log_det_ratio(&d)?
            + (&from.b1 + n.n3).log_det_ratio(&d1)?);
    Ok(w.0 * g1 + w.1 * g2)
}

/// Gradient of `w1·R1 + w2·R2` with respect to `(B1, B2)`.
pub(crate) fn gradient_nats(split: &PowerSplit, n: Noises<'_>, w: (f64, f64)) -> Result<PowerSplit> {
    let b = split.total();
    let b1n1 = (&split.b1 + n.n1).inverse()?;
    let b1n2 = (&split.b1 + n.n2).inverse()?;
    let b1n3 = (&split.b1 + n.n3).inverse()?;
    let bn2 = (&b + n.n2).inverse()?;
    let bn3 = (&b + n.n3).inverse()?;

    let layer2 = &bn2 - &bn3;
    let g1 = (&b1n1 - &b1n3).scale(0.5 * w.0) + (&(&layer2 - &b1n2) + &b1n3).scale(0.5 * w.1);
    let g2 = layer2.scale(0.5 * w.1);
    Ok(PowerSplit { b1: g1, b2: g2 })
}

fn require_feasible(split: &PowerSplit, ch: &Sadbc) -> Result<()> {
    if split.feasible(ch, RATE_FEAS_TOL)? {
        Ok(())
    } else {
        Err(Error::InfeasibleSplit)
    }
}

fn require_mu(mu: f64) -> Result<()> {
    if mu.is_finite() && mu >= 1.0 {
        Ok(())
    } else {
        Err(Error::MuOutOfDomain(mu))
    }
}

/// Secrecy rates achieved by superposing Gaussian layers with covariances `B1`, `B2`.
pub fn rate_pair(split: &PowerSplit, ch: &Sadbc) -> Result<RatePair> {
    require_feasible(split, ch)?;
    let (r1, r2) = rates_nats(split, Noises::of(ch))?;
    Ok(RatePair { r1_bits: nats_to_bits(r1), r2_bits: nats_to_bits(r2), mu: None })
}

/// `R1 + μ·R2` in nats, for `μ ≥ 1`.
pub fn weighted_objective(split: &PowerSplit, ch: &Sadbc, mu: f64) -> Result<f64> {
    require_mu(mu)?;
    require_feasible(split, ch)?;
    objective_nats(split, Noises::of(ch), (1.0, mu))
}

/// `(∇B1, ∇B2)` of `R1 + μ·R2` (nats). Defined wherever the shifted matrices
/// `B1+Nk` and `B+Nk` are positive definite, feasible or not.
pub fn gradient(split: &PowerSplit, ch: &Sadbc, mu: f64) -> Result<(SymMatrix, SymMatrix)> {
    require_mu(mu)?;
    let g = gradient_nats(split, Noises::of(ch), (1.0, mu))?;
    Ok((g.b1, g.b2))
}

/// `h(a) − h(b)` for Gaussian vectors with covariances `a` and `b`, in nats.
pub fn entropy_difference(cov_a: &SymMatrix, cov_b: &SymMatrix) -> Result<f64> {
    cov_a.check_dim(cov_b)?;
    Ok(0.5 * (cov_a.log_det()? - cov_b.log_det()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn scalar(s: f64, n: [f64; 3]) -> Sadbc {
        Sadbc::validate(
            1,
            SymMatrix::scalar(s),
            SymMatrix::scalar(n[0]),
            SymMatrix::scalar(n[1]),
            SymMatrix::scalar(n[2]),
            1e-9,
        )
        .unwrap()
    }

    fn split1(b1: f64, b2: f64) -> PowerSplit {
        PowerSplit::new(SymMatrix::scalar(b1), SymMatrix::scalar(b2)).unwrap()
    }

    // Scalar closed forms, written out independently of the matrix path.
    fn scalar_r1(b1: f64, n: [f64; 3]) -> f64 {
        0.5 * ((b1 + n[0]) / n[0]).ln() - 0.5 * ((b1 + n[2]) / n[2]).ln()
    }

    fn scalar_r2(b1: f64, b2: f64, n: [f64; 3]) -> f64 {
        let b = b1 + b2;
        0.5 * ((b + n[1]) / (b1 + n[1])).ln() - 0.5 * ((b + n[2]) / (b1 + n[2])).ln()
    }

    #[test]
    fn scalar_rate_pair() {
        let ch = scalar(2.0, [1.0, 2.0, 3.0]);
        let r = rate_pair(&split1(0.5, 0.5), &ch).unwrap();
        assert!((r.r1_bits - 0.5 * (9.0f64 / 7.0).log2()).abs() < 1e-14);
        assert!((r.r2_bits - 0.5 * 1.05f64.log2()).abs() < 1e-14);
        assert!((r.r1_bits - 0.18129).abs() < 5e-6);
        assert!((r.r2_bits - 0.03519).abs() < 5e-6);
        assert_eq!(r.mu, None);
    }

    #[test]
    fn zero_power_and_identical_noises_give_zero() {
        let ch = scalar(2.0, [1.0, 2.0, 3.0]);
        let r = rate_pair(&split1(0.0, 0.0), &ch).unwrap();
        assert_eq!((r.r1_bits, r.r2_bits), (0.0, 0.0));

        let same = scalar(2.0, [1.5, 1.5, 1.5]);
        let r = rate_pair(&split1(0.7, 1.1), &same).unwrap();
        assert!(r.r1_bits.abs() < 1e-15 && r.r2_bits.abs() < 1e-15);
    }

    #[test]
    fn infeasible_split_is_rejected() {
        let ch = scalar(2.0, [1.0, 2.0, 3.0]);
        assert!(matches!(rate_pair(&split1(2.0, 2.0), &ch), Err(Error::InfeasibleSplit)));
    }

    #[test]
    fn weighted_objective_values() {
        let ch = scalar(2.0, [1.0, 2.0, 3.0]);
        let s = split1(0.5, 0.5);
        let r = rate_pair(&s, &ch).unwrap();
        let w1 = weighted_objective(&s, &ch, 1.0).unwrap();
        assert!((nats_to_bits(w1) - (r.r1_bits + r.r2_bits)).abs() < 1e-12);
        assert_eq!(weighted_objective(&split1(0.0, 0.0), &ch, 4.2).unwrap(), 0.0);

        let v = weighted_objective(&split1(1.0, 1.0), &ch, 3.0).unwrap();
        let closed = 0.5 * 1.5f64.ln() + 3.0 * 0.5 * (16.0f64 / 15.0).ln();
        assert!((v - closed).abs() < 1e-14);
        assert!((v - 0.299540).abs() < 1e-6);

        // grid oracle: the closed form agrees with the scalar evaluator
        let n = [1.0, 2.0, 3.0];
        for i in 0..=20 {
            let b1 = 0.1 * i as f64;
            let b2 = 2.0 - b1;
            let v = weighted_objective(&split1(b1, b2), &ch, 3.0).unwrap();
            assert!((v - (scalar_r1(b1, n) + 3.0 * scalar_r2(b1, b2, n))).abs() < 1e-13);
        }
        assert!(matches!(weighted_objective(&s, &ch, 0.5), Err(Error::MuOutOfDomain(_))));
    }

    #[test]
    fn scalar_gradient_value() {
        let ch = scalar(2.0, [1.0, 2.0, 3.0]);
        let (g1, g2) = gradient(&split1(1.0, 1.0), &ch, 3.0).unwrap();
        // ½(1/2 − 1/4) + (3/2)(1/4 − 1/3 − 1/5 + 1/4) = 0.125 − 0.05
        assert!((g1.get(0, 0) - 0.075).abs() < 1e-15);
        assert!((g2.get(0, 0) - 0.075).abs() < 1e-15);

        let n = [1.0, 2.0, 3.0];
        let f = |b1: f64| scalar_r1(b1, n) + 3.0 * scalar_r2(b1, 1.0, n);
        let h = 1e-5 * (1.0 + 2f64.sqrt());
        let fd = (f(1.0 + h) - f(1.0 - h)) / (2.0 * h);
        assert!((fd - g1.get(0, 0)).abs() < 1e-8);
    }

    #[test]
    fn second_layer_gradient_vanishes_when_receiver_two_is_the_eavesdropper() {
        let ch = scalar(2.0, [1.0, 3.0, 3.0]);
        let (_, g2) = gradient(&split1(0.4, 0.9), &ch, 2.7).unwrap();
        assert_eq!(g2.get(0, 0), 0.0);
        let ch = Sadbc::validate(
            2,
            SymMatrix::identity(2),
            SymMatrix::identity(2),
            SymMatrix::diag(&[2.0, 3.0]),
            SymMatrix::diag(&[2.0, 3.0]),
            1e-9,
        )
        .unwrap();
        let s = PowerSplit::new(SymMatrix::diag(&[0.2, 0.3]), SymMatrix::diag(&[0.4, 0.1])).unwrap();
        let (_, g2) = gradient(&s, &ch, 5.0).unwrap();
        assert_eq!(g2, SymMatrix::zeros(2));
    }

    #[test]
    fn gradient_is_homogeneous_of_degree_minus_one() {
        let ch = Sadbc::random_instance(2, 3, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = PowerSplit::random_feasible(&ch, &mut rng);
        let doubled = Sadbc::validate(
            2,
            ch.s().scale(2.0),
            ch.n1().scale(2.0),
            ch.n2().scale(2.0),
            ch.n3().scale(2.0),
            1e-9,
        )
        .unwrap();
        let s2 = PowerSplit::new(s.b1.scale(2.0), s.b2.scale(2.0)).unwrap();
        let (a1, a2) = gradient(&s, &ch, 2.0).unwrap();
        let (b1, b2) = gradient(&s2, &doubled, 2.0).unwrap();
        assert!((&b1 - &a1.scale(0.5)).frobenius_norm() < 1e-12);
        assert!((&b2 - &a2.scale(0.5)).frobenius_norm() < 1e-12);
    }

    #[test]
    fn entropy_difference_values() {
        let m = SymMatrix::from_row_major(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
        assert_eq!(entropy_difference(&m, &m).unwrap(), 0.0);
        let v = entropy_difference(&SymMatrix::scalar(4.0), &SymMatrix::scalar(1.0)).unwrap();
        assert!((v - 0.5 * 4f64.ln()).abs() < 1e-15);

        // the second bracket of R2 is h(B+N3) − h(B1+N3) with the sign flipped
        let ch = Sadbc::random_instance(2, 4, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = PowerSplit::random_feasible(&ch, &mut rng);
        let b = s.total();
        let r2 = entropy_difference(&(&b + ch.n2()), &(&s.b1 + ch.n2())).unwrap()
            - entropy_difference(&(&b + ch.n3()), &(&s.b1 + ch.n3())).unwrap();
        let direct = rate_pair(&s, &ch).unwrap().r2_bits;
        assert!((nats_to_bits(r2) - direct).abs() < 1e-13);
    }

    #[test]
    fn r1_nondecreasing_in_scalar_b1() {
        for seed in 0..20 {
            let ch = Sadbc::random_instance(1, seed, 1.0);
            let s = ch.s().get(0, 0);
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=200 {
                let b1 = s * i as f64 / 200.0;
                let r = rate_pair(&split1(b1, 0.0), &ch).unwrap().r1_bits;
                assert!(r >= prev - 1e-15);
                prev = r;
            }
        }
    }

    #[test]
    fn rates_are_congruence_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..50 {
            let t = 1 + (seed % 3) as usize;
            let ch = Sadbc::random_instance(t, seed, 1.0);
            let s = PowerSplit::random_feasible(&ch, &mut rng);
            let tm = DMatrix::<f64>::from_fn(t, t, |i, j| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g + if i == j { 2.0 } else { 0.0 }
            });
            let moved = Sadbc::validate(
                t,
                ch.s().congruence(&tm),
                ch.n1().congruence(&tm),
                ch.n2().congruence(&tm),
                ch.n3().congruence(&tm),
                1e-9,
            )
            .unwrap();
            let ms = PowerSplit::new(s.b1.congruence(&tm), s.b2.congruence(&tm)).unwrap();
            let a = rates_nats(&s, Noises::of(&ch)).unwrap();
            let b = rates_nats(&ms, Noises::of(&moved)).unwrap();
            assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn rates_nonnegative_on_degraded_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for seed in 0..1000 {
            let t = 1 + (seed % 3) as usize;
            let ch = Sadbc::random_instance(t, seed, 1.0);
            let s = PowerSplit::random_feasible(&ch, &mut rng);
            let r = rate_pair(&s, &ch).unwrap();
            assert!(r.r1_bits >= -1e-12 && r.r2_bits >= -1e-12, "seed {seed}: {r:?}");
        }
    }
}
