use std::f64::consts::PI;

use nalgebra::DVector;
use oukl_core::onion::{self, BoundaryResolution, THETA_TOL};
use oukl_core::{DriftModel, Execution, GroupPoint};

/// Smallest θ with every boundary point of `Ω_r(z)` inside `Ω_{θr}(0)`, from
/// the closed form `log φ_p(0, ζ) = −(N+p)/2 log(4πΔ) − |ξ|²/(4Δ)` on a dense
/// boundary grid.
fn dense_theta(r: f64, z: &GroupPoint, m: &DriftModel, p: u32, n_dir: usize, n_depth: usize) -> f64 {
    let n = (m.dim() as u32 + p) as f64;
    let dmax = r.powf(2.0 / n) / (4.0 * PI);
    let mut worst = f64::NEG_INFINITY;
    for j in 0..n_depth {
        let delta = dmax * (j as f64 + 0.5) / n_depth as f64;
        let rho_sq = 4.0 * delta * (r.ln() - 0.5 * n * (4.0 * PI * delta).ln());
        if rho_sq <= 0.0 {
            continue;
        }
        let c = m.apply_propagator(-delta, &z.x);
        let tau = z.t - delta;
        for k in 0..n_dir {
            let a = 2.0 * PI * k as f64 / n_dir as f64;
            let xi = &c + DVector::from_vec(vec![a.cos(), a.sin()]) * rho_sq.sqrt();
            let log_phi = -0.5 * n * (4.0 * PI * -tau).ln() - xi.norm_squared() / (4.0 * -tau);
            worst = worst.max(-log_phi - r.ln());
        }
    }
    worst.exp().max(1.0)
}

#[test]
fn sweep_verifies_inclusion() {
    let m = DriftModel::rotation(1.0);
    let reports = onion::two_onion_sweep(&[0.1, 1.0, 10.0], &m, 5, 16, 3, Execution::Parallel).unwrap();
    assert_eq!(reports.len(), 3 * 18);
    let analytic = onion::analytic_theta(2, 5);
    assert!(reports.iter().all(|r| r.inclusion_verified && r.theta_empirical <= analytic && r.theta_empirical >= 1.0));
}

#[test]
fn tiny_onions_are_still_included() {
    let m = DriftModel::rotation(2.0);
    let reports = onion::two_onion_sweep(&[1e-6], &m, 5, 16, 4, Execution::Sequential).unwrap();
    assert!(reports.iter().all(|r| r.inclusion_verified));
}

#[test]
fn extreme_point_matches_dense_oracle() {
    let m = DriftModel::rotation(1.0);
    let sigma = onion::sigma_sample(1.0, &m, 5, 0, 0);
    let edge = &sigma[1];
    let coarse = onion::empirical_theta(1.0, edge, &m, 5, THETA_TOL, BoundaryResolution::DEFAULT).unwrap();
    let fine = onion::empirical_theta(1.0, edge, &m, 5, THETA_TOL, BoundaryResolution::ORACLE).unwrap();
    let oracle = dense_theta(1.0, edge, &m, 5, 512, 512);
    assert!(fine >= oracle && fine <= oracle * (1.0 + THETA_TOL), "{fine} vs oracle {oracle}");
    assert!(fine >= coarse * (1.0 - THETA_TOL));
    assert!(fine <= onion::analytic_theta(2, 5));
}

#[test]
fn empirical_theta_is_rotation_invariant_without_drift() {
    let m = DriftModel::zero(2);
    let r = 3.0;
    let t = onion::sigma_time(r, 2, 5);
    let rad = 1.3 * (-t).sqrt();
    let thetas: Vec<f64> = (0..6)
        .map(|k| {
            let a = 0.7 * k as f64;
            let z = GroupPoint::new(vec![rad * a.cos(), rad * a.sin()], t);
            let oracle = dense_theta(r, &z, &m, 5, 720, 256);
            let emp = onion::empirical_theta(r, &z, &m, 5, THETA_TOL, BoundaryResolution { directions: 720, depths: 256 }).unwrap();
            assert!(emp >= oracle && emp <= oracle * (1.0 + THETA_TOL));
            emp
        })
        .collect();
    let (lo, hi) = thetas.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(hi / lo - 1.0 <= 2.0 * THETA_TOL, "{thetas:?}");
}

#[test]
fn sweep_maximum_is_bounded_across_r() {
    let m = DriftModel::rotation(0.5);
    let grid = [1e-2, 1.0, 100.0];
    let reports = onion::two_onion_sweep(&grid, &m, 6, 8, 5, Execution::Parallel).unwrap();
    let max_by_r: Vec<f64> = grid
        .iter()
        .map(|&r| reports.iter().filter(|x| x.r == r).map(|x| x.theta_empirical).fold(0.0, f64::max))
        .collect();
    let analytic = onion::analytic_theta(2, 6);
    assert!(max_by_r.iter().all(|&t| t <= analytic));
    let (lo, hi) = max_by_r.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(hi / lo < 1.1, "{max_by_r:?}");
}
