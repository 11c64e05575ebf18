use lacelab::ising::{
    exact_ising, griffiths_check, lebowitz_check, metropolis, tau_and_g_relation_check, IsingConfig, SamplerParams,
};
use lacelab::lattice::PeriodicBox;
use lacelab::step_dist::CouplingTable;

fn ring(side: usize, j: f64, z: f64, h: f64, seed: u64) -> IsingConfig {
    let table = CouplingTable::axial(1, &[(1, j)]).unwrap();
    IsingConfig::new(
        PeriodicBox::new(1, side).unwrap(),
        &table,
        z,
        h,
        None,
        SamplerParams::default(),
        seed,
        4,
    )
    .unwrap()
}

fn square(side: usize, z: f64, seed: u64) -> IsingConfig {
    let table = CouplingTable::axial(2, &[(1, 1.0)]).unwrap();
    IsingConfig::new(
        PeriodicBox::new(2, side).unwrap(),
        &table,
        z,
        0.0,
        None,
        SamplerParams::default(),
        seed,
        4,
    )
    .unwrap()
}

#[test]
fn two_sites_give_tanh() {
    for zj in [0.1, 0.5, 1.3] {
        // J(±1) = zj/2 fold onto the single pair of the two-site box.
        let s = exact_ising(&ring(2, zj / 2.0, 1.0, 0.0, 0)).unwrap();
        assert!((s.g[1] - f64::tanh(zj)).abs() < 1e-15);
    }
}

#[test]
fn three_cycle_matches_hand_enumeration() {
    let (z, h) = (0.3, 0.1);
    let (mut zsum, mut g01, mut mag) = (0.0, 0.0, 0.0);
    for mask in 0..8u32 {
        let s: Vec<f64> = (0..3).map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
        let w = (z * (s[0] * s[1] + s[1] * s[2] + s[2] * s[0]) + h * (s[0] + s[1] + s[2])).exp();
        zsum += w;
        g01 += w * s[0] * s[1];
        mag += w * s[0];
    }
    let e = exact_ising(&ring(3, 1.0, z, h, 0)).unwrap();
    assert!((e.g[1] - g01 / zsum).abs() < 1e-14);
    assert!((e.g[2] - g01 / zsum).abs() < 1e-14);
    assert!((e.magnetization.mean - mag / zsum).abs() < 1e-14);

    let mc = metropolis(&ring(3, 1.0, z, h, 12)).unwrap();
    assert!(mc.g[1] <= 1.0 && mc.g[0] == 1.0);
    assert!(
        mc.magnetization.within(e.magnetization.mean, 3.0),
        "{:?} vs {}",
        mc.magnetization,
        e.magnetization.mean
    );
    assert!(mc.chi.within(e.chi.mean, 3.0));
}

#[test]
fn independent_spins() {
    let e = exact_ising(&ring(4, 1.0, 0.0, 0.4, 0)).unwrap();
    assert!((e.magnetization.mean - f64::tanh(0.4)).abs() < 1e-15);
    let mc = metropolis(&ring(6, 1.0, 0.0, 0.0, 3)).unwrap();
    for x in 1..6 {
        assert!(
            mc.g[x].abs() <= 3.0 * mc.g_se[x] + 1e-12,
            "x={x}: {} ± {}",
            mc.g[x],
            mc.g_se[x]
        );
    }
}

#[test]
fn zero_field_magnetization_vanishes_and_grows_with_field() {
    let c = square(3, 0.3, 0);
    assert_eq!(exact_ising(&c).unwrap().magnetization.mean, 0.0);
    let mut prev = 0.0;
    for h in [0.05, 0.1, 0.2, 0.4] {
        let m = exact_ising(&c.with_h(h).unwrap()).unwrap().magnetization.mean;
        assert!(m > prev);
        prev = m;
    }
}

#[test]
fn metropolis_agrees_with_enumeration() {
    let cases = [
        ring(2, 0.25, 1.0, 0.0, 0),
        ring(4, 1.0, 0.4, 0.0, 0),
        square(3, 0.3, 0),
        square(4, 0.25, 0),
    ];
    for c in cases {
        let e = exact_ising(&c).unwrap();
        let m = metropolis(&c.with_seed(21)).unwrap();
        assert!(
            m.chi_variance.within(e.chi.mean, 4.0),
            "{:?} vs {}",
            m.chi_variance,
            e.chi.mean
        );
        assert!(m.chi.within(e.chi.mean, 4.0));
        assert!((m.chi.mean - m.chi_variance.mean).abs() <= 4.0 * (m.chi.se + m.chi_variance.se));
        assert!(m.warnings.is_empty(), "{:?}", m.warnings);
    }
}

#[test]
fn single_step_bound_on_exact_instances() {
    for c in [
        ring(2, 0.5, 0.8, 0.0, 0),
        ring(3, 1.0, 0.5, 0.0, 0),
        ring(4, 1.0, 0.7, 0.0, 0),
        square(3, 0.4, 0),
    ] {
        let r = tau_and_g_relation_check(&c, &exact_ising(&c).unwrap()).unwrap();
        assert!(r.holds, "{r:?}");
    }
    let z0 = ring(4, 1.0, 0.0, 0.0, 0);
    let r = tau_and_g_relation_check(&z0, &exact_ising(&z0).unwrap()).unwrap();
    assert!(r.lhs.iter().all(|v| *v == 0.0) && r.rhs.iter().all(|v| *v == 0.0));
}

#[test]
fn griffiths_and_lebowitz() {
    let long = CouplingTable::axial(1, &[(1, 1.0), (2, 0.5)]).unwrap();
    let c = IsingConfig::new(
        PeriodicBox::new(1, 6).unwrap(),
        &long,
        0.3,
        0.0,
        None,
        SamplerParams::default(),
        0,
        1,
    )
    .unwrap();
    assert!(griffiths_check(&c, 1e-3, 1e-3).unwrap().holds);
    assert!(griffiths_check(&c.with_h(0.2).unwrap(), 1e-3, 1e-3).unwrap().holds);
    for z in [0.05, 0.2, 0.5] {
        let r = lebowitz_check(&c.with_z(z).unwrap(), 1e-5).unwrap();
        assert!(r.holds, "{r:?}");
    }
}
