use lacelab::lattice::PeriodicBox;
use lacelab::percolation::{
    cluster_size_full, e_r, exact_small, magnetization, magnetization_tail, restricted_triangle,
    restricted_triangle_matrix, reveal_cluster, russo_check, sample_cluster, PercConfig,
};
use lacelab::step_dist::StepDistribution;

fn nn(d: usize) -> StepDistribution {
    StepDistribution::nearest_neighbor(d).unwrap()
}

fn config(dist: &StepDistribution, side: usize, z: f64, seed: u64, replicas: usize) -> PercConfig {
    PercConfig::new(
        PeriodicBox::new(dist.dim(), side).unwrap(),
        dist,
        z,
        None,
        seed,
        replicas,
    )
    .unwrap()
}

fn instances(seed: u64, replicas: usize) -> Vec<PercConfig> {
    vec![
        config(&nn(1), 2, 0.5, seed, replicas),
        config(&nn(1), 3, 1.0, seed, replicas),
        config(&nn(1), 5, 1.0, seed, replicas),
        config(&nn(2), 3, 1.2, seed, replicas),
        config(&StepDistribution::uniform(1, 2).unwrap(), 6, 1.6, seed, replicas),
    ]
}

#[test]
fn three_cycle_against_hand_count() {
    let p: f64 = 0.5;
    let q = 1.0 - p;
    let one = q * q;
    let two = 2.0 * p * q * q;
    let oracle = one + 2.0 * two + 3.0 * (1.0 - one - two);
    let e = exact_small(&config(&nn(1), 3, 1.0, 0, 1)).unwrap();
    assert!((e.chi - oracle).abs() < 1e-15);
    assert!((e.chi - 2.25).abs() < 1e-15);
    // τ(u, v) = p + (1 − p)p² for distinct sites, fed through T³.
    let t = p + q * p * p;
    let nabla = ((1.0 + 2.0 * t).powi(3) - (1.0 - t).powi(3)) / 3.0;
    let c = config(&nn(1), 3, 1.0, 0, 1);
    assert!((restricted_triangle_matrix(&c, &e.connectivity).unwrap() - nabla).abs() < 1e-13);
    let m = magnetization_tail(&e.size_dist, 2, 0.5, &[0.5, 1.0]).unwrap();
    assert!(m.upper_holds && m.lower_chain.iter().all(|l| l.holds));
}

#[test]
fn bond_free_limits() {
    for c in instances(0, 1) {
        let c = c.with_z(0.0).unwrap();
        let e = exact_small(&c).unwrap();
        assert_eq!(e.chi, 1.0);
        assert_eq!(e.tail(2), 0.0);
        assert_eq!(restricted_triangle_matrix(&c, &e.connectivity).unwrap(), 0.0);
        let s = sample_cluster(&c.with_seed(4)).unwrap();
        assert_eq!(s.chi.mean, 1.0);
    }
}

#[test]
fn saturated_bonds_span_the_torus() {
    let c = config(&nn(1), 40, 2.0, 1, 50);
    let s = sample_cluster(&c).unwrap();
    assert_eq!(s.histogram, vec![(40, 50)]);
}

#[test]
fn two_site_russo() {
    let c = config(&nn(1), 2, 0.3, 0, 1);
    let e = exact_small(&c).unwrap();
    let r = russo_check(&c, &e, 1e-4).unwrap();
    assert!((r.dchi_dz - 1.0).abs() < 1e-15 && (r.russo_sum - 1.0).abs() < 1e-15);
}

#[test]
fn russo_identity_and_bounds_on_every_instance() {
    for c in instances(0, 1) {
        for f in [0.25, 0.5, 0.75, 1.0] {
            let c = c.with_z(c.z() * f).unwrap();
            let e = exact_small(&c).unwrap();
            let r = russo_check(&c, &e, 1e-5).unwrap();
            assert!(r.identity_holds, "{r:?}");
            assert!(r.tree_graph_holds && r.lower_bound_holds, "{r:?}");
            assert!((r.finite_difference - r.dchi_dz).abs() < 1e-6 * r.dchi_dz.max(1.0));
        }
    }
}

#[test]
fn exact_quantities_monotone_in_z() {
    for c in instances(0, 1) {
        let (mut chi, mut nabla) = (0.0, -1.0);
        for i in 0..=8 {
            let c = c.with_z(c.z() * i as f64 / 8.0).unwrap();
            let e = exact_small(&c).unwrap();
            let n = restricted_triangle_matrix(&c, &e.connectivity).unwrap();
            assert!(e.chi >= chi - 1e-14 && n >= nabla - 1e-14);
            chi = e.chi;
            nabla = n;
        }
    }
}

#[test]
fn lazy_and_full_revelation_share_the_cluster_law() {
    for c in instances(9, 1) {
        for r in 0..300 {
            assert_eq!(reveal_cluster(&c, r).unwrap().len(), cluster_size_full(&c, r));
        }
    }
}

#[test]
fn monte_carlo_matches_exact() {
    for c in instances(17, 4000) {
        let e = exact_small(&c).unwrap();
        let s = sample_cluster(&c).unwrap();
        assert!(s.chi.within(e.chi, 4.0), "{} vs {}", s.chi.mean, e.chi);
        let from_hist: f64 = s
            .size_distribution()
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum();
        assert!((from_hist - s.chi.mean).abs() < 1e-12);
        let conn = s.connectivity.as_ref().unwrap();
        assert!(conn.iter().all(|p| (0.0..=1.0).contains(p)));
        let tri = restricted_triangle(&c, &s).unwrap();
        let exact = restricted_triangle_matrix(&c, &e.connectivity).unwrap();
        assert!((tri.nabla - exact).abs() < 0.1 * exact.max(0.1));
    }
}

#[test]
fn sampled_chi_increases_along_a_sweep() {
    let base = config(&nn(2), 6, 0.0, 5, 3000);
    let mut prev: Option<lacelab::stats::Estimate> = None;
    for i in 0..5 {
        let s = sample_cluster(&base.with_z(0.2 * i as f64).unwrap()).unwrap();
        if let Some(p) = prev {
            assert!(s.chi.mean >= p.mean - 3.0 * (s.chi.se + p.se));
        }
        prev = Some(s.chi);
    }
}

#[test]
fn magnetization_sandwich_on_exact_instances() {
    for c in instances(0, 1) {
        let e = exact_small(&c).unwrap();
        assert_eq!(magnetization(&e.size_dist, 0.0), 0.0);
        for n in [2, 3] {
            let r = magnetization_tail(&e.size_dist, n, 1.0 / n as f64, &[0.25, 0.5, 1.0]).unwrap();
            assert!(r.upper_holds, "{r:?}");
            assert!(r.lower_chain.iter().all(|l| l.holds), "{r:?}");
        }
    }
}

#[test]
fn range_tail_decreases() {
    let d = StepDistribution::power_law(1, 1, 1.0).unwrap();
    let mut prev = 1.0;
    for r in [1.0, 2.0, 4.0, 8.0, 16.0] {
        let t = e_r(&d, r);
        assert!(t < prev && t > 0.0);
        prev = t;
    }
    assert!(e_r(&nn(3), 1.0) < 1e-15);
}
