use lacelab::quadrature::DualGrid;
use lacelab::random_walk::{beta, beta_kspace, beta_xspace, return_probability, return_probability_kspace};
use lacelab::step_dist::StepDistribution;
use lacelab::torus::{convolve, convolve_direct, dft, idft, Space, TorusField, TorusGrid};
use num_complex::Complex64;
use proptest::prelude::*;

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[test]
fn four_step_return_probability_in_one_dimension() {
    let dist = StepDistribution::nearest_neighbor(1).unwrap();
    let grid = TorusGrid::new(1, 16).unwrap();
    let oracle = binomial(4, 2) / 16.0;
    assert_eq!(oracle, 0.375);
    assert!((return_probability(&dist, &grid, 4).unwrap() - oracle).abs() < 1e-12);
    assert!((return_probability_kspace(&dist, &grid, 4).unwrap() - oracle).abs() < 1e-12);
}

#[test]
fn return_probabilities_agree_across_spaces() {
    for (dist, m) in [
        (StepDistribution::nearest_neighbor(2).unwrap(), 16),
        (StepDistribution::uniform(2, 2).unwrap(), 16),
        (StepDistribution::power_law(1, 1, 1.5).unwrap(), 32),
    ] {
        let grid = TorusGrid::new(dist.dim(), m).unwrap();
        for n in 1..6 {
            let a = return_probability(&dist, &grid, n).unwrap();
            let b = return_probability_kspace(&dist, &grid, n).unwrap();
            assert!((a - b).abs() < 1e-12, "{} n={n}: {a} vs {b}", dist.family());
        }
    }
}

#[test]
fn beta_forms_agree_on_six_cases() {
    let cases = [
        (StepDistribution::nearest_neighbor(3).unwrap(), 2, 8),
        (StepDistribution::nearest_neighbor(5).unwrap(), 2, 8),
        (StepDistribution::nearest_neighbor(7).unwrap(), 3, 4),
        (StepDistribution::uniform(2, 2).unwrap(), 2, 16),
        (StepDistribution::uniform(3, 1).unwrap(), 3, 8),
        (StepDistribution::power_law(2, 1, 1.5).unwrap(), 2, 16),
    ];
    for (dist, s, m) in cases {
        let grid = TorusGrid::new(dist.dim(), m).unwrap();
        let k = beta_kspace(&DualGrid::new(&dist, m).unwrap(), s);
        let x = beta_xspace(&dist, &grid, s).unwrap();
        assert!(
            (k - x).abs() <= 1e-9 * k.abs().max(1.0),
            "{} d={} s={s}: {k} vs {x}",
            dist.family(),
            dist.dim()
        );
    }
}

#[test]
fn divergence_flag_tracks_dimension() {
    let low = beta(
        &StepDistribution::nearest_neighbor(1).unwrap(),
        &TorusGrid::new(1, 64).unwrap(),
        2,
    )
    .unwrap();
    assert!(low.divergent && !low.thresholds.finite);
    let high = beta(
        &StepDistribution::nearest_neighbor(5).unwrap(),
        &TorusGrid::new(5, 8).unwrap(),
        2,
    )
    .unwrap();
    assert!(!high.divergent && high.thresholds.finite);
}

fn field(d: usize, m: usize, vals: &[f64]) -> TorusField {
    let grid = TorusGrid::new(d, m).unwrap();
    let n = grid.num_sites();
    let v: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(vals[i % vals.len()], vals[(i * 7 + 3) % vals.len()]))
        .collect();
    TorusField::new(&grid, Space::X, v).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn transform_round_trip(vals in prop::collection::vec(-5.0f64..5.0, 1..64), d in 1usize..4) {
        let f = field(d, 4, &vals);
        let back = idft(&dft(&f).unwrap()).unwrap();
        for (a, b) in f.values().iter().zip(back.values()) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn convolution_theorem(a in prop::collection::vec(-2.0f64..2.0, 1..40), b in prop::collection::vec(-2.0f64..2.0, 1..40)) {
        let (f, g) = (field(2, 6, &a), field(2, 6, &b));
        let fast = convolve(&f, &g).unwrap();
        let slow = convolve_direct(&f, &g).unwrap();
        for (x, y) in fast.values().iter().zip(slow.values()) {
            prop_assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn parseval(vals in prop::collection::vec(-3.0f64..3.0, 1..50)) {
        let f = field(1, 16, &vals);
        let x: f64 = f.values().iter().map(|v| v.norm_sqr()).sum();
        let k: f64 = dft(&f).unwrap().values().iter().map(|v| v.norm_sqr()).sum::<f64>() / 16.0;
        prop_assert!((x - k).abs() < 1e-10 * x.max(1.0));
    }
}
