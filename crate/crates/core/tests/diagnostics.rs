use lacelab::diagnostics::{
    b_tilde_bound, bootstrap_f, bubble_triangle, chain_of_bubbles, cos_g_bound_check, diagram_report, inequality_suite,
    infrared_check, PairMode, TwoPointInput,
};
use lacelab::ising::{exact_ising, IsingConfig, SamplerParams};
use lacelab::lattice::PeriodicBox;
use lacelab::step_dist::{CouplingTable, StepDistribution};
use lacelab::torus::{folded_symbol, TorusGrid};

fn nn(d: usize) -> StepDistribution {
    StepDistribution::nearest_neighbor(d).unwrap()
}

#[test]
fn free_bubble_matches_xspace_iteration() {
    let (m, z) = (64usize, 0.5);
    // C = δ + z D∗C by fixed-point iteration on the ring.
    let mut c = vec![0.0; m];
    for _ in 0..200 {
        let mut next = vec![0.0; m];
        next[0] = 1.0;
        for x in 0..m {
            next[x] += z * 0.5 * (c[(x + 1) % m] + c[(x + m - 1) % m]);
        }
        c = next;
    }
    let oracle: f64 = c.iter().map(|v| v * v).sum();
    let r = bubble_triangle(&TwoPointInput::free(&nn(1), m, z).unwrap()).unwrap();
    assert!((r.b - oracle).abs() < 1e-10, "{} vs {oracle}", r.b);
    assert!(r.parseval_dev < 1e-9);
}

#[test]
fn base_point_values() {
    for d in [1, 3] {
        let b = bootstrap_f(&TwoPointInput::free(&nn(d), 8, 0.0).unwrap()).unwrap();
        assert_eq!((b.f1, b.f2, b.f3), (0.0, 1.0, 0.0));
        assert_eq!(b.f3_mode, PairMode::Exhaustive);
    }
}

#[test]
fn free_model_identities() {
    for i in 1..=9 {
        let z = i as f64 / 10.0;
        for dist in [nn(2), StepDistribution::uniform(2, 1).unwrap()] {
            let input = TwoPointInput::free(&dist, 16, z).unwrap();
            assert!(infrared_check(&input).sup_deviation <= 1e-12);
            let b = bootstrap_f(&input).unwrap();
            assert!((b.f2 - 1.0).abs() <= 1e-12);
            assert!((b.lambda - z).abs() < 1e-12);
            let c = input.c_lambda();
            assert!((input.ghat[0] - c[0]).abs() < 1e-12 * c[0]);
        }
    }
}

#[test]
fn infrared_ratio_on_exact_ising_shrinks_as_z_falls() {
    let table = CouplingTable::axial(1, &[(1, 1.0)]).unwrap();
    let grid = TorusGrid::new(1, 4).unwrap();
    let dhat = folded_symbol(&nn(1), &grid).unwrap();
    let mut prev = f64::INFINITY;
    for z in [0.2, 0.1, 0.05] {
        let c = IsingConfig::new(
            PeriodicBox::new(1, 4).unwrap(),
            &table,
            z,
            0.0,
            None,
            SamplerParams::default(),
            0,
            1,
        )
        .unwrap();
        let g = exact_ising(&c).unwrap().g;
        let input = TwoPointInput::from_xspace(1, 4, &g, dhat.clone(), 2.0 * z.tanh(), None).unwrap();
        let dev = infrared_check(&input).sup_deviation;
        assert!(dev.is_finite() && dev < prev, "z={z}: {dev}");
        prev = dev;
    }
}

#[test]
fn chain_and_bubble_bounds_for_five_dimensional_free_model() {
    let input = TwoPointInput::free(&nn(5), 4, 0.5).unwrap();
    let chain = chain_of_bubbles(&input).unwrap();
    assert!(chain.converged && chain.holds, "{chain:?}");
    let k = bootstrap_f(&input).unwrap().max().max(1.0);
    assert!(cos_g_bound_check(&input, k).unwrap().iter().all(|r| r.holds));
    let b = b_tilde_bound(&input, k).unwrap();
    assert!(b.holds && b.b_tilde <= b.second);
    let report = diagram_report(&input, None).unwrap();
    assert!(report.open_bubble.holds && report.identity.holds);
    assert!(report.diagrams.b >= 1.0 && report.diagrams.t >= 1.0);
}

#[test]
fn chain_refused_for_large_bubble() {
    let input = TwoPointInput::free(&nn(1), 16, 0.95).unwrap();
    let chain = chain_of_bubbles(&input).unwrap();
    assert!(chain.psi_mass.is_none() && chain.flag.is_some());
}

#[test]
fn suite_has_no_violations_apart_from_the_unit_constant_delta_bound() {
    for e in inequality_suite(100, 7).unwrap() {
        assert!(e.instances >= 100, "{e:?}");
        if e.name == "delta_vs_cos_sum" {
            // g ≥ 0 at l = 0 gives |Δ_kĝ(0)| = 2Σ[1 − cos(k·x)]g(x).
            assert!(e.violations > 0 && (e.worst_ratio - 2.0).abs() < 1e-9, "{e:?}");
        } else {
            assert_eq!(e.violations, 0, "{e:?}");
        }
    }
}

#[test]
fn input_round_trips_through_json() {
    let input = TwoPointInput::free(&nn(2), 8, 0.3).unwrap();
    let text = serde_json::to_string(&input).unwrap();
    let back: TwoPointInput = serde_json::from_str(&text).unwrap();
    assert_eq!(back, input);
}
