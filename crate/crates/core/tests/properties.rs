use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sadbc::rates::{rate_pair, weighted_objective};
use sadbc::solver::maximize_weighted;
use sadbc::{PowerSplit, Sadbc, SolveOptions, SymMatrix};

/// `½ log2 det(a) / det(b)` through LU determinants.
fn half_log2_ratio(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    0.5 * (a.clone().determinant() / b.clone().determinant()).log2()
}

fn oracle_rates(ch: &Sadbc, x: &PowerSplit) -> (f64, f64) {
    let [n1, n2, n3] = [ch.n1(), ch.n2(), ch.n3()].map(|m| m.as_matrix().clone());
    let b1 = x.b1.as_matrix();
    let b = b1 + x.b2.as_matrix();
    let r1 = half_log2_ratio(&(b1 + &n1), &n1) - half_log2_ratio(&(b1 + &n3), &n3);
    let r2 = half_log2_ratio(&(&b + &n2), &(b1 + &n2)) - half_log2_ratio(&(&b + &n3), &(b1 + &n3));
    (r1, r2)
}

fn congruent(ch: &Sadbc, t: &DMatrix<f64>) -> Sadbc {
    let c = |m: &SymMatrix| SymMatrix::new(t * m.as_matrix() * t.transpose()).unwrap();
    Sadbc::validate(ch.dim(), c(ch.s()), c(ch.n1()), c(ch.n2()), c(ch.n3()), 1e-8).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rates_match_determinant_formula(t in 1usize..=4, seed in 0u64..10_000) {
        let ch = Sadbc::random_instance(t, seed, 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = PowerSplit::random_feasible(&ch, &mut rng);
        let got = rate_pair(&x, &ch).unwrap();
        let (r1, r2) = oracle_rates(&ch, &x);
        prop_assert!((got.r1_bits - r1).abs() < 1e-9, "{} vs {r1}", got.r1_bits);
        prop_assert!((got.r2_bits - r2).abs() < 1e-9, "{} vs {r2}", got.r2_bits);
    }

    #[test]
    fn solution_beats_random_feasible_splits(t in 1usize..=3, seed in 0u64..10_000, mu in 1.0f64..6.0) {
        let ch = Sadbc::random_instance(t, seed, 2.0);
        let sol = maximize_weighted(&ch, mu, &SolveOptions::default()).unwrap();
        prop_assert!(sol.split.feasible(&ch, 1e-8).unwrap());
        let best = weighted_objective(&sol.split, &ch, mu).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for _ in 0..50 {
            let x = PowerSplit::random_feasible(&ch, &mut rng);
            prop_assert!(weighted_objective(&x, &ch, mu).unwrap() <= best + 1e-9);
        }
    }

    #[test]
    fn clamp_is_feasible_and_idempotent(t in 1usize..=3, seed in 0u64..10_000) {
        let ch = Sadbc::random_instance(t, seed, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = PowerSplit::random_feasible(&ch, &mut rng);
        prop_assert_eq!(x.clamp_to_feasible(&ch).unwrap(), x.clone());
        let pushed = PowerSplit { b1: x.b1.scale(3.0), b2: &x.b2 - &ch.s().scale(0.5) };
        let y = pushed.clamp_to_feasible(&ch).unwrap();
        prop_assert!(y.feasible(&ch, 1e-8).unwrap());
        let z = y.clamp_to_feasible(&ch).unwrap();
        prop_assert!((&z.b1 - &y.b1).frobenius_norm() < 1e-9 && (&z.b2 - &y.b2).frobenius_norm() < 1e-9);
    }

    // Rates are invariant under a common congruence of S and the noises, so
    // the optimum value is too.
    #[test]
    fn optimum_is_congruence_invariant(seed in 0u64..10_000, mu in 1.0f64..5.0) {
        let ch = Sadbc::random_instance(2, seed, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = DMatrix::<f64>::identity(2, 2) + DMatrix::from_fn(2, 2, |_, _| rng.random_range(-0.4..0.4));
        let other = congruent(&ch, &t);
        let opts = SolveOptions::default();
        let a = maximize_weighted(&ch, mu, &opts).unwrap().objective_nats;
        let b = maximize_weighted(&other, mu, &opts).unwrap().objective_nats;
        prop_assert!((a - b).abs() < 1e-7 * (1.0 + a.abs()), "{a} vs {b}");
    }
}
