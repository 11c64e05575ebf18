use lacelab::saw::{chi_series, count_walks_bruteforce, enumerate, extract_lace, EnumConfig, Mode};
use lacelab::step_dist::StepDistribution;

/// Self-avoiding walk counts on ℤ² from an independent recursive search.
fn square_counts(n: usize) -> Vec<u64> {
    fn go(path: &mut Vec<(i32, i32)>, left: usize, counts: &mut [u64]) {
        let depth = path.len() - 1;
        counts[depth] += 1;
        if left == 0 {
            return;
        }
        let (x, y) = *path.last().unwrap();
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let next = (x + dx, y + dy);
            if !path.contains(&next) {
                path.push(next);
                go(path, left - 1, counts);
                path.pop();
            }
        }
    }
    let mut counts = vec![0; n + 1];
    go(&mut vec![(0, 0)], n, &mut counts);
    counts
}

#[test]
fn square_lattice_counts_are_exact() {
    let dist = StepDistribution::nearest_neighbor(2).unwrap();
    let series = enumerate(&dist, &EnumConfig::new(2, 6, Mode::Rational)).unwrap();
    let oracle = square_counts(6);
    assert_eq!(oracle, vec![1, 4, 12, 36, 100, 284, 780]);
    for (n, &count) in oracle.iter().enumerate() {
        assert_eq!(series.walk_count(n), Some(count as i128), "n={n}");
        assert_eq!(count_walks_bruteforce(&series.steps(), n), count);
    }
}

#[test]
fn line_susceptibility_converges() {
    let dist = StepDistribution::nearest_neighbor(1).unwrap();
    let series = enumerate(&dist, &EnumConfig::new(1, 25, Mode::Rational).with_budget(25)).unwrap();
    let r = chi_series(&series, 1.0).unwrap();
    assert!((r.value - 3.0).abs() < 1e-6, "{}", r.value);
    assert!(r.remainder < 1e-6);
    let z = 0.7;
    let r = chi_series(&series, z).unwrap();
    assert!((r.value - (2.0 + z) / (2.0 - z)).abs() < 1e-6);
}

#[test]
fn third_lace_coefficient_on_the_line() {
    let dist = StepDistribution::nearest_neighbor(1).unwrap();
    let series = enumerate(&dist, &EnumConfig::new(1, 6, Mode::Rational)).unwrap();
    let lace = extract_lace(&series).unwrap();
    assert_eq!(lace.value(2, &[0]), -0.5);
    // Immediate reversal after one step, then stepping back out.
    assert_eq!(lace.value(3, &[1]), 0.125);
    assert_eq!(lace.value(3, &[-1]), 0.125);
    assert_eq!(lace.value(3, &[3]), 0.0);
    assert!(lace.reconstruct(&series).unwrap().exact);
}

#[test]
fn lace_reconstruction_is_exact_on_the_square_lattice() {
    let dist = StepDistribution::nearest_neighbor(2).unwrap();
    let series = enumerate(&dist, &EnumConfig::new(2, 8, Mode::Rational)).unwrap();
    let lace = extract_lace(&series).unwrap();
    assert_eq!(lace.value(2, &[0, 0]), -0.25);
    let rep = lace.reconstruct(&series).unwrap();
    assert!(rep.exact && rep.mismatches == 0, "{rep:?}");
}

#[test]
fn two_point_function_from_lace_matches_series() {
    let dist = StepDistribution::nearest_neighbor(2).unwrap();
    let n = 10;
    let series = enumerate(&dist, &EnumConfig::new(2, n, Mode::Double)).unwrap();
    let lace = extract_lace(&series).unwrap();
    let z = 0.2;
    for k in [[0.0, 0.0], [0.5, -1.0], [3.0, 2.0]] {
        let direct = series.g_hat(z, &k);
        let via = 1.0 / (1.0 - z * series.step_symbol(&k) - lace.pi_hat(z, &k));
        // Both truncate at order zⁿ; the mismatch starts at z^{n+1}.
        assert!(
            (direct - via).abs() < 10.0 * z.powi(n as i32 + 1),
            "k={k:?}: {direct} vs {via}"
        );
    }
}
