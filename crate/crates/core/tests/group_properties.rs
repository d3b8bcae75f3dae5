use nalgebra::{DMatrix, DVector};
use oukl_core::par::stream_rng;
use oukl_core::{linalg, DriftModel, GroupPoint};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn random_antisymmetric(rng: &mut impl Rng, n: usize) -> DriftModel {
    let mut b = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = rng.random_range(-2.0..2.0);
            b[(i, j)] = v;
            b[(j, i)] = -v;
        }
    }
    DriftModel::new(b).unwrap()
}

fn random_point(rng: &mut impl Rng, n: usize) -> GroupPoint {
    GroupPoint::new((0..n).map(|_| rng.random_range(-3.0..3.0)).collect(), rng.random_range(-5.0..5.0))
}

#[test]
fn unitarity_on_a_thousand_cases() {
    let mut rng = stream_rng(11, 0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=4);
        let m = random_antisymmetric(&mut rng, n);
        let tau = rng.random_range(-50.0..50.0);
        worst = worst.max(m.propagator(tau).unwrap().unitarity_defect());
    }
    assert!(worst <= 1e-12, "worst unitarity defect {worst}");
}

#[test]
fn group_axioms_on_a_thousand_triples() {
    let mut rng = stream_rng(12, 0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=4);
        let m = random_antisymmetric(&mut rng, n);
        let (a, b, c) = (random_point(&mut rng, n), random_point(&mut rng, n), random_point(&mut rng, n));
        let left = m.compose(&m.compose(&a, &b).unwrap(), &c).unwrap();
        let right = m.compose(&a, &m.compose(&b, &c).unwrap()).unwrap();
        worst = worst.max(left.max_distance(&right));
        let e = GroupPoint::origin(n);
        worst = worst.max(m.compose(&a, &e).unwrap().max_distance(&a));
        worst = worst.max(m.compose(&e, &a).unwrap().max_distance(&a));
        let inv = m.inverse(&a).unwrap();
        worst = worst.max(m.compose(&a, &inv).unwrap().max_distance(&e));
        worst = worst.max(m.compose(&inv, &a).unwrap().max_distance(&e));
    }
    assert!(worst <= 1e-10, "worst axiom residual {worst}");
}

#[test]
fn propagator_semigroup() {
    let mut rng = stream_rng(13, 0);
    for _ in 0..200 {
        let m = random_antisymmetric(&mut rng, 3);
        let (s, t) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let lhs = m.propagator(s + t).unwrap().matrix;
        let rhs = m.propagator(s).unwrap().matrix * m.propagator(t).unwrap().matrix;
        assert!(linalg::max_abs(&(lhs - rhs)) <= 1e-10);
    }
}

#[test]
fn chapman_kolmogorov_through_an_intermediate_time() {
    // Γ(z, ζ) = ∫ Γ(z, (ξ_w, s)) Γ((ξ_w, s), ζ) dξ_w; the second factor is the
    // density of N(E(s − τ)ξ, 2(s − τ)I) in ξ_w, so we sample from it.
    let m = DriftModel::rotation(0.8);
    let zeta = GroupPoint::new(vec![0.3, -0.4], 0.0);
    let z = GroupPoint::new(vec![0.5, 0.7], 1.5);
    let s = 0.6;
    let mean = m.apply_propagator(s - zeta.t, &zeta.x);
    let normal = Normal::new(0.0, (2.0 * (s - zeta.t)).sqrt()).unwrap();
    let mut rng = stream_rng(14, 0);
    let n = 100_000;
    let vals: Vec<f64> = (0..n)
        .map(|_| {
            let w = GroupPoint { x: DVector::from_fn(2, |i, _| mean[i] + normal.sample(&mut rng)), t: s };
            m.fundamental_solution(&z, &w)
        })
        .collect();
    let mc = oukl_core::stats::mean(&vals);
    let se = (oukl_core::stats::variance(&vals) / n as f64).sqrt();
    let exact = m.fundamental_solution(&z, &zeta);
    assert!((mc - exact).abs() <= 3.0 * se, "mc {mc} ± {se}, exact {exact}");
}

#[test]
fn fundamental_solution_is_harmonic_off_the_pole() {
    let m = DriftModel::cross_product([0.5, -1.0, 0.25]);
    let pole = GroupPoint::new(vec![0.2, 0.0, -0.3], -1.0);
    let mut rng = stream_rng(15, 0);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
        let t = pole.t + 0.1 + rng.random_range(0.0..2.0);
        let res = m.kolmogorov_residual(|x, t| m.fundamental_solution(&GroupPoint::new(x.to_vec(), t), &pole), &x, t, 1e-3);
        worst = worst.max(res.abs());
    }
    assert!(worst <= 1e-4, "worst residual {worst}");
}

#[test]
fn paraboloid_membership_persists_downward() {
    let m = DriftModel::rotation(1.1);
    let z0 = GroupPoint::new(vec![0.5, -1.0], 2.0);
    let mut rng = stream_rng(16, 0);
    for _ in 0..50 {
        let x = DVector::from_fn(2, |_, _| rng.random_range(-4.0..4.0));
        let entry = m.paraboloid_entry_time(&x, &z0);
        for k in 1..=40 {
            let t = entry - 0.25 * k as f64;
            assert!(m.in_paraboloid(&GroupPoint { x: x.clone(), t }, &z0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn gamma_is_left_invariant(
        b in prop::array::uniform3(-2.0f64..2.0),
        w in prop::collection::vec(-3.0f64..3.0, 4),
        z in prop::collection::vec(-3.0f64..3.0, 4),
        zeta in prop::collection::vec(-3.0f64..3.0, 4),
    ) {
        let m = DriftModel::cross_product(b);
        let pt = |v: &Vec<f64>| GroupPoint::new(v[..3].to_vec(), v[3]);
        let (w, z, zeta) = (pt(&w), pt(&z), pt(&zeta));
        let lhs = m.fundamental_solution(&m.compose(&w, &z).unwrap(), &m.compose(&w, &zeta).unwrap());
        let rhs = m.fundamental_solution(&z, &zeta);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300) + 1e-14);
    }

    #[test]
    fn phi_p_is_left_invariant(
        alpha in -3.0f64..3.0,
        z0 in prop::collection::vec(-2.0f64..2.0, 3),
        z in prop::collection::vec(-2.0f64..2.0, 3),
        p in 1u32..8,
    ) {
        let m = DriftModel::rotation(alpha);
        let z0 = GroupPoint::new(z0[..2].to_vec(), z0[2]);
        let z = GroupPoint::new(z[..2].to_vec(), z[2]);
        let lhs = m.scaled_fundamental_solution(&z0, &z, p);
        let rel = m.compose(&m.inverse(&z0).unwrap(), &z).unwrap();
        let rhs = m.scaled_fundamental_solution(&GroupPoint::origin(2), &rel, p);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(rhs) + 1e-300);
        prop_assert_eq!(lhs > 0.0, z.t < z0.t);
    }

    #[test]
    fn inverse_is_two_sided(alpha in -5.0f64..5.0, x in prop::collection::vec(-10.0f64..10.0, 2), t in -20.0f64..20.0) {
        let m = DriftModel::rotation(alpha);
        let z = GroupPoint::new(x, t);
        let inv = m.inverse(&z).unwrap();
        prop_assert!(m.compose(&z, &inv).unwrap().max_distance(&GroupPoint::origin(2)) <= 1e-10);
        prop_assert!(m.compose(&inv, &z).unwrap().max_distance(&GroupPoint::origin(2)) <= 1e-10);
    }
}
