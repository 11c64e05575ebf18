use std::f64::consts::PI;

use approx::assert_relative_eq;
use lacelab::lattice::PeriodicBox;
use lacelab::step_dist::{verify_conditions, StepDistribution};
use lacelab::torus::fold_onto_box;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn nn_direct(k: &[f64]) -> f64 {
    let d = k.len() as f64;
    k.iter().map(|t| 0.5 * ((*t).cos() + (-*t).cos())).sum::<f64>() / d
}

#[test]
fn nn_symbol_matches_cosine_average_at_random_momenta() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for i in 0..10_000 {
        let d = 1 + i % 12;
        let dist = StepDistribution::nearest_neighbor(d).unwrap();
        let k: Vec<f64> = (0..d)
            .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect();
        let v = dist.fourier(&k).unwrap();
        assert!((v - nn_direct(&k)).abs() <= 1e-14, "d={d} k={k:?}");
    }
}

#[test]
fn uniform_symbol_matches_box_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (d, l) = (2usize, 3i64);
    let dist = StepDistribution::uniform(d, l as u32).unwrap();
    let norm = ((2 * l + 1) * (2 * l + 1) - 1) as f64;
    for _ in 0..200 {
        let k = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        let mut s = 0.0;
        for a in -l..=l {
            for b in -l..=l {
                if (a, b) != (0, 0) {
                    s += (k[0] * a as f64 + k[1] * b as f64).cos() / norm;
                }
            }
        }
        assert_relative_eq!(dist.fourier(&k).unwrap(), s, epsilon = 1e-13);
    }
}

#[test]
fn power_law_fold_matches_image_sum() {
    let (l, alpha, m) = (2u32, 1.5, 8i64);
    let dist = StepDistribution::power_law(1, l, alpha).unwrap();
    let lat = PeriodicBox::new(1, m as usize).unwrap();
    let folded = fold_onto_box(&dist, &lat).unwrap();
    let h = |x: i64| ((x.abs() as f64) / l as f64).max(1.0).powf(-1.0 - alpha);
    let radius = 1_000_000i64;
    let mut images = vec![0.0; m as usize];
    for x in -radius..=radius {
        if x != 0 {
            images[x.rem_euclid(m) as usize] += h(x) / dist.norm_const();
        }
    }
    // Mass beyond the image radius, bounded by the integral of h.
    let far = 2.0 * (l as f64).powf(1.0 + alpha) * (radius as f64).powf(-alpha) / alpha / dist.norm_const();
    let tol = 2.0 * dist.tail_mass() + far + 1e-12;
    for o in 0..m as usize {
        assert!(
            (folded[o] - images[o]).abs() <= tol,
            "offset {o}: {} vs {}",
            folded[o],
            images[o]
        );
    }
    assert_relative_eq!(folded.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
}

#[test]
fn nn_lower_bound_confirmed_on_grid() {
    let r = verify_conditions(&StepDistribution::nearest_neighbor(5).unwrap(), 16, 0.1).unwrap();
    let pi2 = std::f64::consts::PI.powi(2);
    assert!(r.c1_hat >= 2.0 / (pi2 * 5.0) - 1e-12, "c1_hat = {}", r.c1_hat);
    // D̂(π, …, π) = −1, so the nearest-neighbor walk has no gap below −1.
    assert!(!r.passed);
    assert!(r.violations.iter().any(|v| v.condition == "upper_gap"));
}

#[test]
fn spread_out_conditions_pass() {
    let r = verify_conditions(&StepDistribution::uniform(5, 3).unwrap(), 8, 0.1).unwrap();
    assert!(r.passed, "{:?}", r.violations);
    assert!(r.c1_hat > 0.0 && r.c2_hat > 0.0);
}

fn family() -> impl Strategy<Value = StepDistribution> {
    prop_oneof![
        (1usize..6).prop_map(|d| StepDistribution::nearest_neighbor(d).unwrap()),
        (1usize..4, 1u32..4).prop_map(|(d, l)| StepDistribution::uniform(d, l).unwrap()),
        (1usize..3, 1u32..3, 0.5f64..3.0).prop_map(|(d, l, a)| StepDistribution::power_law(d, l, a).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn symmetric_nonnegative_and_normalized(dist in family(), seed in 0u64..1000) {
        let d = dist.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let x: Vec<i64> = (0..d).map(|_| rng.gen_range(-6..=6)).collect();
            let neg: Vec<i64> = x.iter().map(|c| -c).collect();
            let v = dist.eval(&x).unwrap();
            prop_assert!(v >= 0.0 && v <= dist.sup() + 1e-15);
            prop_assert_eq!(v, dist.eval(&neg).unwrap());
        }
        prop_assert_eq!(dist.eval(&vec![0; d]).unwrap(), 0.0);
        prop_assert!((dist.fourier(&vec![0.0; d]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symbol_is_real_bounded_and_even(dist in family(), seed in 0u64..1000) {
        let d = dist.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k: Vec<f64> = (0..d).map(|_| rng.gen_range(-PI..PI)).collect();
        let neg: Vec<f64> = k.iter().map(|t| -t).collect();
        let v = dist.fourier(&k).unwrap();
        prop_assert!(v.abs() <= 1.0 + 1e-12);
        prop_assert!((v - dist.fourier(&neg).unwrap()).abs() < 1e-13);
    }
}
