//! Two-onion inclusion: for `z` on the slice
//! `Σ_r = {t = −r^{2/(N+p)}, |x|² < −4t}` the onion `Ω_r^(p)(z)` sits inside
//! `Ω_{θr}^(p)(0)` for a `θ` that does not depend on `r`.

use std::f64::consts::{E, PI};

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{DriftModel, GroupPoint};
use crate::mvf::OnionSpec;
use crate::par::{self, Execution};
use crate::quadrature;

/// Bisection tolerance (relative) for the empirical `θ`.
pub const THETA_TOL: f64 = 1e-3;

/// Boundary sampling resolution: directions × depths per onion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryResolution {
    pub directions: usize,
    pub depths: usize,
}

impl BoundaryResolution {
    pub const DEFAULT: Self = Self { directions: 64, depths: 64 };
    pub const ORACLE: Self = Self { directions: 512, depths: 512 };
}

impl Default for BoundaryResolution {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// The constants of the inclusion argument and the `θ` they produce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticTheta {
    /// `2 sup{s log(1/s) : 0 < s < 1} + 8π/(N+p)`
    pub c0: f64,
    /// `inf{s log(1/s) : 4π ≤ s ≤ 1 + 4π}`, attained at `s = 1 + 4π`
    pub c1: f64,
    /// `8π/(N+p)`
    pub c2: f64,
    /// `exp((c0 − c1)/c2) × 1.01`
    pub theta: f64,
}

pub fn analytic_constants(dim: usize, p: u32) -> AnalyticTheta {
    let n = (dim as u32 + p) as f64;
    let c0 = 2.0 / E + 8.0 * PI / n;
    let s = 1.0 + 4.0 * PI;
    let c1 = s * (1.0 / s).ln();
    let c2 = 8.0 * PI / n;
    AnalyticTheta { c0, c1, c2, theta: ((c0 - c1) / c2).exp() * 1.01 }
}

pub fn analytic_theta(dim: usize, p: u32) -> f64 {
    analytic_constants(dim, p).theta
}

/// `t` coordinate of `Σ_r`.
pub fn sigma_time(r: f64, dim: usize, p: u32) -> f64 {
    -r.powf(2.0 / (dim as u32 + p) as f64)
}

/// Points of `Σ_r`: first `x = 0` and the near-extreme `|x| = 2r^{1/(N+p)}(1 − 1e−9)`,
/// then `k` uniform samples of the open ball.
pub fn sigma_sample(r: f64, model: &DriftModel, p: u32, k: usize, seed: u64) -> Vec<GroupPoint> {
    let dim = model.dim();
    let t = sigma_time(r, dim, p);
    let radius = 2.0 * (-t).sqrt();
    let mut out = Vec::with_capacity(k + 2);
    out.push(GroupPoint::new(vec![0.0; dim], t));
    let mut edge = vec![0.0; dim];
    edge[0] = radius * (1.0 - 1e-9);
    out.push(GroupPoint::new(edge, t));
    let mut rng = par::stream_rng(seed, 0);
    for _ in 0..k {
        let (s, dir) = quadrature::random_in_unit_ball(&mut rng, dim);
        let s = s.min(1.0 - 1e-9);
        out.push(GroupPoint::new(dir.iter().map(|d| radius * s * d).collect(), t));
    }
    out
}

/// Deterministic, roughly even directions on the unit sphere of `R^dim`.
pub fn sphere_directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|j| {
                let a = 2.0 * PI * j as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            // Fibonacci lattice
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|j| {
                    let zc = 1.0 - 2.0 * (j as f64 + 0.5) / count as f64;
                    let s = (1.0 - zc * zc).sqrt();
                    let a = golden * j as f64;
                    vec![s * a.cos(), s * a.sin(), zc]
                })
                .collect()
        }
        _ => {
            let mut rng = par::stream_rng(0x5eed, dim as u64);
            (0..count).map(|_| quadrature::random_direction(&mut rng, dim)).collect()
        }
    }
}

/// Points on `∂Ω_r^(p)(z)`: spheres of the slice balls at midpoint depths.
pub fn onion_boundary(spec: &OnionSpec, res: BoundaryResolution) -> Vec<GroupPoint> {
    let dmax = spec.max_depth();
    let dirs = sphere_directions(spec.dim(), res.directions);
    let mut out = Vec::with_capacity(dirs.len() * res.depths);
    for j in 0..res.depths {
        let delta = dmax * (j as f64 + 0.5) / res.depths as f64;
        let Ok(Some(slice)) = spec.slice(delta) else { continue };
        for d in &dirs {
            let x = &slice.center + DVector::from_column_slice(d) * slice.radius;
            out.push(GroupPoint { x, t: spec.center.t - delta });
        }
    }
    out
}

/// `min_ζ log φ_p(0, ζ)` over the boundary sample of `Ω_r^(p)(z)`.
fn min_log_level(r: f64, z: &GroupPoint, model: &DriftModel, p: u32, res: BoundaryResolution) -> Result<f64> {
    let spec = OnionSpec::new(z.clone(), r, p, model.clone())?;
    let origin = GroupPoint::origin(model.dim());
    Ok(onion_boundary(&spec, res)
        .iter()
        .map(|zeta| model.log_scaled_fundamental_solution(&origin, zeta, p))
        .fold(f64::INFINITY, f64::min))
}

/// Smallest `θ ∈ [1, 10·θ_analytic]` (to relative `tol`) such that every
/// boundary-sampled point of `Ω_r^(p)(z)` lies in `Ω_{θr}^(p)(0)`, by bisection.
pub fn empirical_theta(
    r: f64,
    z: &GroupPoint,
    model: &DriftModel,
    p: u32,
    tol: f64,
    res: BoundaryResolution,
) -> Result<f64> {
    let min_log = min_log_level(r, z, model, p, res)?;
    // ζ ∈ Ω_{θr}(0) ⇔ log φ_p(0, ζ) + log(θ r) > 0
    let passes = |theta: f64| min_log + (theta * r).ln() > 0.0;
    let hi_bound = 10.0 * analytic_theta(model.dim(), p);
    if passes(1.0) {
        return Ok(1.0);
    }
    if !passes(hi_bound) {
        return Err(Error::LemmaViolation(format!(
            "r = {r}, z = ({:?}, {}): inclusion fails even at θ = {hi_bound:e}",
            z.x.as_slice(),
            z.t
        )));
    }
    let (mut lo, mut hi) = (1.0f64, hi_bound);
    while hi / lo - 1.0 > tol {
        let mid = (lo * hi).sqrt();
        if passes(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaReport {
    pub r: f64,
    pub x: Vec<f64>,
    pub t: f64,
    pub theta_empirical: f64,
    pub theta_analytic: f64,
    pub inclusion_verified: bool,
    /// Boundary points tested.
    pub samples: usize,
}

pub fn theta_report(r: f64, z: &GroupPoint, model: &DriftModel, p: u32, res: BoundaryResolution) -> Result<ThetaReport> {
    let theta_analytic = analytic_theta(model.dim(), p);
    let theta_empirical = empirical_theta(r, z, model, p, THETA_TOL, res)?;
    let min_log = min_log_level(r, z, model, p, res)?;
    let inclusion_verified = min_log + (theta_analytic * r).ln() > 0.0;
    Ok(ThetaReport {
        r,
        x: z.x.iter().cloned().collect(),
        t: z.t,
        theta_empirical,
        theta_analytic,
        inclusion_verified,
        samples: res.directions.max(2) * res.depths,
    })
}

/// Runs the inclusion check over `r_grid × Σ_r` samples and enforces
/// `max θ_empirical ≤ θ_analytic`.
pub fn two_onion_sweep(
    r_grid: &[f64],
    model: &DriftModel,
    p: u32,
    k: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<ThetaReport>> {
    if r_grid.is_empty() || r_grid.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidInput("r grid must be non-empty and positive".into()));
    }
    model.require_antisymmetric()?;
    let pairs: Vec<(f64, GroupPoint)> = r_grid
        .iter()
        .enumerate()
        .flat_map(|(i, &r)| {
            sigma_sample(r, model, p, k, seed.wrapping_add(i as u64)).into_iter().map(move |z| (r, z))
        })
        .collect();
    let reports: Result<Vec<_>> = par::map_indexed(exec, pairs.len(), |i| {
        theta_report(pairs[i].0, &pairs[i].1, model, p, BoundaryResolution::DEFAULT)
    })
    .into_iter()
    .collect();
    let reports = reports?;
    if let Some(bad) = reports.iter().find(|rep| !rep.inclusion_verified || rep.theta_empirical > rep.theta_analytic) {
        return Err(Error::LemmaViolation(format!(
            "r = {}: θ_empirical = {} exceeds θ_analytic = {}",
            bad.r, bad.theta_empirical, bad.theta_analytic
        )));
    }
    Ok(reports)
}

/// Samples of the onion `Ω_r^(p)(z)` parametrised so that the same normalized
/// draws give parabolically rescaled points for every `r`: depth fraction,
/// radius fraction and a direction taken relative to the rotated centre.
pub(crate) fn covariant_onion_points(
    spec: &OnionSpec,
    draws: &[(f64, f64, Vec<f64>)],
) -> Vec<(GroupPoint, f64, f64, f64)> {
    let dmax = spec.max_depth();
    draws
        .iter()
        .filter_map(|(frac, s, dir)| {
            let delta = dmax * frac;
            let rho_sq = spec.slice_radius_sq(delta);
            if rho_sq <= 0.0 {
                return None;
            }
            let rho = rho_sq.sqrt();
            let local = &spec.center.x + DVector::from_column_slice(dir) * (s * rho);
            let x = spec.model.apply_propagator(-delta, &local);
            let y_sq = (s * rho) * (s * rho);
            Some((GroupPoint { x, t: spec.center.t - delta }, delta, y_sq, rho_sq - y_sq))
        })
        .collect()
}

/// Normalized draws for [`covariant_onion_points`], uniform in the onion's
/// slice parametrisation, with the boundary layer `s > 1 − 1e−6` excluded.
pub(crate) fn covariant_draws(dim: usize, n: usize, seed: u64) -> Vec<(f64, f64, Vec<f64>)> {
    use rand::Rng;
    let mut rng = par::stream_rng(seed, 1 << 32);
    (0..n)
        .map(|_| {
            let frac = rng.random::<f64>().max(1e-12);
            let (s, dir) = quadrature::random_in_unit_ball(&mut rng, dim);
            (frac, s.min(1.0 - 1e-6), dir)
        })
        .collect()
}
