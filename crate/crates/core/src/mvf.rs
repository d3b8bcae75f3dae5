//! Level-set "onions" `Ω_r^(p)(z0) = {φ_p(z0, ·) > 1/r}`, their kernels, and
//! numerical evaluation of the mean-value formula
//!
//! ```text
//! u(z0) = (1/r) ∫_{Ω_r^(p)(z0)} u(z) W_r^(p)(z0⁻¹ ∘ z) dz.
//! ```
//!
//! The onion is integrated slice by slice in the depth `Δ = t0 − t`. By
//! unitarity of `E`, each slice is an exact Euclidean ball centred at
//! `E(−Δ)x0`, and in slice coordinates `y = x − E(−Δ)x0` the kernel only
//! depends on `|y|` and `Δ`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{DriftModel, GroupPoint};
use crate::par::{self, Execution};
use crate::quadrature::{self, BallRule};

/// A smooth function `u(x, t)` on `{t > domain_floor}`.
pub trait SolutionField: Send + Sync {
    fn eval(&self, x: &[f64], t: f64) -> f64;

    fn label(&self) -> String;

    /// Valid for `t > domain_floor`; `−∞` for global fields.
    fn domain_floor(&self) -> f64 {
        f64::NEG_INFINITY
    }

    /// Whether the field is known to solve `Lu = 0` on its domain.
    fn is_harmonic(&self) -> bool {
        true
    }

    /// Evaluator for a fixed time; fields override this to hoist work that
    /// only depends on `t` out of the per-point loop.
    fn at_time<'a>(&'a self, t: f64) -> Box<dyn Fn(&[f64]) -> f64 + 'a> {
        Box::new(move |x| self.eval(x, t))
    }
}

/// A [`SolutionField`] backed by a closure.
#[derive(Clone)]
pub struct FnField {
    label: String,
    floor: f64,
    harmonic: bool,
    f: Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>,
}

impl FnField {
    pub fn new<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    {
        Self { label: label.into(), floor: f64::NEG_INFINITY, harmonic: true, f: Arc::new(f) }
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }

    pub fn not_harmonic(mut self) -> Self {
        self.harmonic = false;
        self
    }
}

impl SolutionField for FnField {
    fn eval(&self, x: &[f64], t: f64) -> f64 {
        (self.f)(x, t)
    }
    fn label(&self) -> String {
        self.label.clone()
    }
    fn domain_floor(&self) -> f64 {
        self.floor
    }
    fn is_harmonic(&self) -> bool {
        self.harmonic
    }
}

/// `u ∘ ℓ_w`, i.e. `z ↦ u(w ∘ z)`.
pub struct LeftTranslate<F> {
    pub inner: F,
    pub by: GroupPoint,
    pub model: DriftModel,
}

impl<F: SolutionField> SolutionField for LeftTranslate<F> {
    fn eval(&self, x: &[f64], t: f64) -> f64 {
        self.at_time(t)(x)
    }
    fn label(&self) -> String {
        format!("{} translated", self.inner.label())
    }
    fn domain_floor(&self) -> f64 {
        self.inner.domain_floor() - self.by.t
    }
    fn is_harmonic(&self) -> bool {
        self.inner.is_harmonic()
    }
    fn at_time<'a>(&'a self, t: f64) -> Box<dyn Fn(&[f64]) -> f64 + 'a> {
        // w ∘ (x, t) = (x + E(t)w_x, w_t + t)
        let shift = self.model.apply_propagator(t, &self.by.x);
        let inner = self.inner.at_time(self.by.t + t);
        Box::new(move |x| {
            let y: Vec<f64> = x.iter().zip(shift.iter()).map(|(a, b)| a + b).collect();
            inner(&y)
        })
    }
}

impl<F: SolutionField + ?Sized> SolutionField for std::sync::Arc<F> {
    fn eval(&self, x: &[f64], t: f64) -> f64 {
        (**self).eval(x, t)
    }
    fn label(&self) -> String {
        (**self).label()
    }
    fn domain_floor(&self) -> f64 {
        (**self).domain_floor()
    }
    fn is_harmonic(&self) -> bool {
        (**self).is_harmonic()
    }
    fn at_time<'a>(&'a self, t: f64) -> Box<dyn Fn(&[f64]) -> f64 + 'a> {
        (**self).at_time(t)
    }
}

/// Identifies `Ω_r^(p)(z0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OnionSpec {
    pub center: GroupPoint,
    pub r: f64,
    pub p: u32,
    pub model: DriftModel,
}

/// The ball `{|x − center| < radius}` cut from an onion at depth `delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct OnionSlice {
    pub delta: f64,
    pub center: DVector<f64>,
    pub radius: f64,
}

impl OnionSpec {
    pub fn new(center: GroupPoint, r: f64, p: u32, model: DriftModel) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidInput(format!("onion level r must be positive, got {r}")));
        }
        if p == 0 {
            return Err(Error::InvalidInput("kernel order p must be at least 1".into()));
        }
        if center.dim() != model.dim() {
            return Err(Error::DimensionMismatch { expected: model.dim(), got: center.dim() });
        }
        if !center.is_finite() {
            return Err(Error::InvalidInput("onion center must be finite".into()));
        }
        model.require_antisymmetric()?;
        Ok(Self { center, r, p, model })
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// `N + p`.
    pub fn homogeneity(&self) -> f64 {
        (self.dim() as u32 + self.p) as f64
    }

    /// `Δ_max = r^{2/(N+p)} / (4π)`; slices are empty from this depth on.
    pub fn max_depth(&self) -> f64 {
        max_depth(self.r, self.dim(), self.p)
    }

    /// `4Δ log(r / (4πΔ)^{(N+p)/2})`, the squared slice radius (negative past `Δ_max`).
    pub fn slice_radius_sq(&self, delta: f64) -> f64 {
        slice_radius_sq(self.r, self.homogeneity(), delta)
    }

    /// `φ_p(z0, ζ) > 1/r`.
    pub fn contains(&self, zeta: &GroupPoint) -> bool {
        self.model.log_scaled_fundamental_solution(&self.center, zeta, self.p) > -self.r.ln()
    }

    pub fn slice(&self, delta: f64) -> Result<Option<OnionSlice>> {
        if !(delta > 0.0) {
            return Err(Error::InvalidInput(format!("slice depth must be positive, got {delta}")));
        }
        let rsq = self.slice_radius_sq(delta);
        if rsq <= 0.0 {
            return Ok(None);
        }
        Ok(Some(OnionSlice {
            delta,
            center: self.model.apply_propagator(-delta, &self.center.x),
            radius: rsq.sqrt(),
        }))
    }

    /// The same onion with level `r` replaced.
    pub fn with_level(&self, r: f64) -> Result<Self> {
        Self::new(self.center.clone(), r, self.p, self.model.clone())
    }
}

pub fn onion_contains(spec: &OnionSpec, zeta: &GroupPoint) -> bool {
    spec.contains(zeta)
}

pub fn onion_slice(spec: &OnionSpec, delta: f64) -> Result<Option<OnionSlice>> {
    spec.slice(delta)
}

pub fn max_depth(r: f64, dim: usize, p: u32) -> f64 {
    r.powf(2.0 / (dim as u32 + p) as f64) / (4.0 * PI)
}

pub(crate) fn slice_radius_sq(r: f64, homogeneity: f64, delta: f64) -> f64 {
    4.0 * delta * (r.ln() - 0.5 * homogeneity * (4.0 * PI * delta).ln())
}

/// `W(x, t) = ¼ |x|² / t²`.
pub fn spatial_kernel(z: &GroupPoint) -> Result<f64> {
    if z.t == 0.0 {
        return Err(Error::Singular("W(x, t) is undefined at t = 0".into()));
    }
    Ok(0.25 * z.x.norm_squared() / (z.t * z.t))
}

/// `log(r φ_p(0, z))`, clamped to zero within rounding of the onion boundary.
fn level_log(z: &GroupPoint, r: f64, p: u32, model: &DriftModel) -> Result<f64> {
    let origin = GroupPoint::origin(z.dim());
    let l = r.ln() + model.log_scaled_fundamental_solution(&origin, z, p);
    if z.t >= 0.0 || l < -1e-12 {
        return Err(Error::Domain(format!(
            "point lies outside Ω_r^(p)(0) (r = {r}, p = {p}, t = {})",
            z.t
        )));
    }
    Ok(l.max(0.0))
}

/// `R_r(0, z) = √(4(−t) log(r φ_p(0, z)))`.
pub fn level_radius(z: &GroupPoint, r: f64, p: u32, model: &DriftModel) -> Result<f64> {
    let l = level_log(z, r, p, model)?;
    Ok((-4.0 * z.t * l).sqrt())
}

/// `W_r^(p)(z) = ω_p R^p {W(z) + p/(4(p+2)) (R/t)²}` with `R = R_r(0, z)`.
pub fn onion_weight(z: &GroupPoint, r: f64, p: u32, model: &DriftModel) -> Result<f64> {
    let big_r = level_radius(z, r, p, model)?;
    Ok(weight_from_parts(z.x.norm_squared(), -z.t, big_r * big_r, p))
}

/// Weight in slice coordinates: `|y|²`, depth `Δ` and `R² = ρ(Δ)² − |y|²`.
pub(crate) fn weight_from_parts(y_sq: f64, delta: f64, level_sq: f64, p: u32) -> f64 {
    WeightKernel::new(p).eval(y_sq, delta, level_sq)
}

/// `W_r^(p)` with `ω_p` and the integer power of `R` precomputed.
#[derive(Debug, Clone, Copy)]
pub(crate) struct WeightKernel {
    omega: f64,
    half: i32,
    odd: bool,
    c: f64,
}

impl WeightKernel {
    pub(crate) fn new(p: u32) -> Self {
        let pf = p as f64;
        Self {
            omega: quadrature::unit_ball_volume(p as usize),
            half: (p / 2) as i32,
            odd: p % 2 == 1,
            c: pf / (4.0 * (pf + 2.0)),
        }
    }

    #[inline]
    pub(crate) fn eval(&self, y_sq: f64, delta: f64, level_sq: f64) -> f64 {
        if level_sq <= 0.0 {
            return 0.0;
        }
        let mut rp = level_sq.powi(self.half);
        if self.odd {
            rp *= level_sq.sqrt();
        }
        self.omega * rp * (0.25 * y_sq + self.c * level_sq) / (delta * delta)
    }
}

/// Quadrature scheme for the onion integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    TensorGrid,
    MonteCarlo,
}

/// Resolution of the onion integral.
///
/// Depth is discretized by the midpoint rule in `n_slices` slices. For the
/// tensor grid, `n_per_slice` is the target node count per slice, split evenly
/// over the `N` polar axes (`⌈n^{1/N}⌉` per axis); for Monte Carlo it is the
/// number of uniform samples per slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub scheme: Scheme,
    pub n_slices: usize,
    pub n_per_slice: usize,
    pub seed: u64,
    #[serde(default)]
    pub execution: Execution,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::TensorGrid,
            n_slices: 200,
            n_per_slice: 40_000,
            seed: 0,
            execution: Execution::Parallel,
        }
    }
}

impl QuadratureConfig {
    pub fn grid(n_slices: usize, n_per_slice: usize) -> Self {
        Self { n_slices, n_per_slice, ..Self::default() }
    }

    pub fn monte_carlo(n_slices: usize, n_per_slice: usize, seed: u64) -> Self {
        Self { scheme: Scheme::MonteCarlo, n_slices, n_per_slice, seed, ..Self::default() }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_slices == 0 || self.n_per_slice == 0 {
            return Err(Error::InvalidInput("quadrature counts must be at least 1".into()));
        }
        Ok(())
    }

    pub(crate) fn nodes_per_axis(&self, dim: usize) -> usize {
        let m = (self.n_per_slice as f64).powf(1.0 / dim as f64).round() as usize;
        m.max(1)
    }
}

/// Right-hand side of the mean-value formula with an a-posteriori error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanValue {
    pub value: f64,
    /// Richardson estimate (grid) or three standard errors (Monte Carlo).
    pub error: f64,
    /// Largest `|u|` seen on the quadrature nodes.
    pub scale: f64,
    pub evaluations: usize,
}

/// Numerical value of `(1/r) ∫_{Ω_r^(p)(z0)} u(z) W_r^(p)(z0⁻¹ ∘ z) dz`.
pub fn mean_value(u: &dyn SolutionField, spec: &OnionSpec, cfg: &QuadratureConfig) -> Result<MeanValue> {
    cfg.validate()?;
    let dmax = spec.max_depth();
    // Below time resolution at t0 the onion has no numerical extent.
    if !(dmax > 0.0) || !dmax.is_finite() || spec.center.t - dmax == spec.center.t {
        return Err(Error::EmptyOnion(format!("Δ_max = {dmax:e} for r = {:e}", spec.r)));
    }
    let floor = u.domain_floor();
    if !(spec.center.t - dmax > floor) {
        return Err(Error::Domain(format!(
            "onion reaches t = {} but {} is only defined for t > {floor}",
            spec.center.t - dmax,
            u.label()
        )));
    }
    match cfg.scheme {
        Scheme::TensorGrid => {
            let rule = BallRule::product(spec.dim(), cfg.nodes_per_axis(spec.dim()))?;
            let coarse = grid_pass(u, spec, &rule, cfg.n_slices, cfg.execution);
            let fine = grid_pass(u, spec, &rule, 2 * cfg.n_slices, cfg.execution);
            let diff = fine.sum - coarse.sum;
            Ok(MeanValue {
                value: fine.sum + diff / 3.0,
                error: diff.abs() / 3.0,
                scale: coarse.scale.max(fine.scale),
                evaluations: coarse.evaluations + fine.evaluations,
            })
        }
        Scheme::MonteCarlo => Ok(monte_carlo_pass(u, spec, cfg)),
    }
}

struct Pass {
    sum: f64,
    scale: f64,
    evaluations: usize,
}

struct SliceGeometry {
    delta: f64,
    t: f64,
    center: DVector<f64>,
    rho_sq: f64,
}

fn slice_geometry(spec: &OnionSpec, delta: f64) -> SliceGeometry {
    SliceGeometry {
        delta,
        t: spec.center.t - delta,
        center: spec.model.apply_propagator(-delta, &spec.center.x),
        rho_sq: spec.slice_radius_sq(delta).max(0.0),
    }
}

fn grid_pass(u: &dyn SolutionField, spec: &OnionSpec, rule: &BallRule, n: usize, exec: Execution) -> Pass {
    let dim = spec.dim();
    let h = spec.max_depth() / n as f64;
    let parts = par::map_indexed(exec, n, |k| {
        let g = slice_geometry(spec, (k as f64 + 0.5) * h);
        let rho = g.rho_sq.sqrt();
        let f = u.at_time(g.t);
        let kernel = WeightKernel::new(spec.p);
        let mut x = vec![0.0; dim];
        let (mut acc, mut scale) = (0.0, 0.0f64);
        for ((&s, dir), &w) in rule.radii.iter().zip(&rule.directions).zip(&rule.weights) {
            let y_sq = (s * rho) * (s * rho);
            for i in 0..dim {
                x[i] = g.center[i] + s * rho * dir[i];
            }
            let v = f(&x);
            scale = scale.max(v.abs());
            acc += w * v * kernel.eval(y_sq, g.delta, g.rho_sq - y_sq);
        }
        (acc * rho.powi(dim as i32), scale)
    });
    let sum: f64 = parts.iter().map(|p| p.0).sum();
    Pass {
        sum: sum * h / spec.r,
        scale: parts.iter().map(|p| p.1).fold(0.0, f64::max),
        evaluations: n * rule.len(),
    }
}

fn monte_carlo_pass(u: &dyn SolutionField, spec: &OnionSpec, cfg: &QuadratureConfig) -> MeanValue {
    let dim = spec.dim();
    let n = cfg.n_slices;
    let m = cfg.n_per_slice;
    let h = spec.max_depth() / n as f64;
    let vol = quadrature::unit_ball_volume(dim);
    let parts = par::map_indexed(cfg.execution, n, |k| {
        let g = slice_geometry(spec, (k as f64 + 0.5) * h);
        let rho = g.rho_sq.sqrt();
        let f = u.at_time(g.t);
        let mut rng = par::stream_rng(cfg.seed, k as u64);
        let kernel = WeightKernel::new(spec.p);
        let mut x = vec![0.0; dim];
        let (mut s1, mut s2, mut scale) = (0.0, 0.0, 0.0f64);
        for _ in 0..m {
            let (s, dir) = quadrature::random_in_unit_ball(&mut rng, dim);
            let y_sq = (s * rho) * (s * rho);
            for i in 0..dim {
                x[i] = g.center[i] + s * rho * dir[i];
            }
            let v = f(&x);
            scale = scale.max(v.abs());
            let term = v * kernel.eval(y_sq, g.delta, g.rho_sq - y_sq);
            s1 += term;
            s2 += term * term;
        }
        let mf = m as f64;
        let mean = s1 / mf;
        let var = if m > 1 { (s2 - mf * mean * mean).max(0.0) / (mf - 1.0) } else { 0.0 };
        let ball = vol * rho.powi(dim as i32);
        (ball * mean, ball * ball * var / mf, scale)
    });
    let c = h / spec.r;
    let value = c * parts.iter().map(|p| p.0).sum::<f64>();
    let var = c * c * parts.iter().map(|p| p.1).sum::<f64>();
    MeanValue {
        value,
        error: 3.0 * var.sqrt(),
        scale: parts.iter().map(|p| p.2).fold(0.0, f64::max),
        evaluations: n * m,
    }
}

/// Outcome of integrating `u ≡ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalizationReport {
    pub value: f64,
    pub deviation: f64,
    pub error: f64,
}

/// Integrates `u ≡ 1` over the onion; the exact answer is 1.
pub fn onion_volume_weight_check(spec: &OnionSpec, cfg: &QuadratureConfig) -> Result<NormalizationReport> {
    let one = FnField::new("constant 1", |_, _| 1.0);
    let mv = mean_value(&one, spec, cfg)?;
    Ok(NormalizationReport { value: mv.value, deviation: (mv.value - 1.0).abs(), error: mv.error })
}

/// A uniformly random point of the open onion, excluding a thin boundary layer.
pub fn sample_onion<R: Rng + ?Sized>(spec: &OnionSpec, rng: &mut R) -> GroupPoint {
    let dmax = spec.max_depth();
    loop {
        // Rejection on the depth so that the joint law is uniform in volume.
        let delta = dmax * rng.random::<f64>();
        if delta <= 0.0 {
            continue;
        }
        let rho_sq = spec.slice_radius_sq(delta);
        if rho_sq <= 0.0 {
            continue;
        }
        let vol = rho_sq.powf(0.5 * spec.dim() as f64);
        let vmax = peak_slice_volume(spec);
        if rng.random::<f64>() * vmax > vol {
            continue;
        }
        let (s, dir) = quadrature::random_in_unit_ball(rng, spec.dim());
        let s = s.min(1.0 - 1e-9);
        let rho = rho_sq.sqrt();
        let g = slice_geometry(spec, delta);
        let x: Vec<f64> = (0..spec.dim()).map(|i| g.center[i] + s * rho * dir[i]).collect();
        return GroupPoint::new(x, g.t);
    }
}

/// `max_Δ ρ(Δ)^N`; `ρ²` peaks at `Δ = Δ_max / e`.
fn peak_slice_volume(spec: &OnionSpec) -> f64 {
    let d = spec.max_depth() / std::f64::consts::E;
    spec.slice_radius_sq(d).powf(0.5 * spec.dim() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(r: f64) -> OnionSpec {
        OnionSpec::new(GroupPoint::origin(2), r, 5, DriftModel::rotation(1.0)).unwrap()
    }

    #[test]
    fn spec_validation() {
        let m = DriftModel::rotation(1.0);
        assert!(OnionSpec::new(GroupPoint::origin(2), 0.0, 5, m.clone()).is_err());
        assert!(OnionSpec::new(GroupPoint::origin(2), 1.0, 0, m.clone()).is_err());
        assert!(OnionSpec::new(GroupPoint::origin(3), 1.0, 5, m).is_err());
        let nil = DriftModel::from_rows(2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            OnionSpec::new(GroupPoint::origin(2), 1.0, 5, nil),
            Err(Error::NotAntisymmetric(_))
        ));
    }

    #[test]
    fn contains_examples() {
        let s = OnionSpec::new(GroupPoint::new(vec![0.4, -0.2], 1.3), 1.0, 5, DriftModel::rotation(1.0)).unwrap();
        assert!(!s.contains(&GroupPoint::new(vec![0.4, -0.2], 1.3)));
        assert!(!s.contains(&GroupPoint::new(vec![0.4, -0.2], 2.0)));
        let dmax = s.max_depth();
        // z0 ∘ (0, −Δ) = (E(−Δ)x0, t0 − Δ)
        let mid = s.model.compose(&s.center, &GroupPoint::new(vec![0.0, 0.0], -dmax / 2.0)).unwrap();
        assert!(s.contains(&mid));
        let deep = s.model.compose(&s.center, &GroupPoint::new(vec![0.0, 0.0], -dmax * (1.0 + 1e-9))).unwrap();
        assert!(!s.contains(&deep));
        let deeper = GroupPoint::new(vec![0.4, -0.2], 1.3 - 2.0 * dmax);
        assert!(!s.contains(&deeper));
    }

    #[test]
    fn slice_examples() {
        let s = spec(3.0);
        for d in [0.001, 0.01, 0.05] {
            let sl = s.slice(d).unwrap().unwrap();
            assert_eq!(sl.center, DVector::zeros(2));
        }
        let near = s.slice(s.max_depth() * (1.0 - 1e-9)).unwrap().unwrap();
        assert!(near.radius < 1e-3);
        assert!(s.slice(s.max_depth()).unwrap().is_none());
        assert!(s.slice(0.0).is_err());
        assert!(s.slice(-1.0).is_err());

        // r = (4π)^{7/2} puts Δ_max at 1; at Δ = 1/2, ρ² = 2 log 2^{3.5} = 7 log 2.
        let unit = spec((4.0 * PI).powf(3.5));
        assert_relative_eq!(unit.max_depth(), 1.0, max_relative = 1e-14);
        let sl = unit.slice(0.5).unwrap().unwrap();
        assert_relative_eq!(sl.radius * sl.radius, 7.0 * 2f64.ln(), max_relative = 1e-13);
    }

    #[test]
    fn spatial_kernel_examples() {
        assert_eq!(spatial_kernel(&GroupPoint::new(vec![0.0, 0.0], -1.0)).unwrap(), 0.0);
        assert_eq!(spatial_kernel(&GroupPoint::new(vec![2.0, 0.0], -1.0)).unwrap(), 1.0);
        let a = spatial_kernel(&GroupPoint::new(vec![0.3, -0.8], -0.7)).unwrap();
        let b = spatial_kernel(&GroupPoint::new(vec![-0.3, 0.8], -0.7)).unwrap();
        assert_eq!(a, b);
        assert!(matches!(spatial_kernel(&GroupPoint::origin(2)), Err(Error::Singular(_))));
    }

    #[test]
    fn level_radius_examples() {
        let m = DriftModel::rotation(1.0);
        let (r, p) = (2.0, 5);
        let delta = 0.03;
        let rho_sq = 4.0 * delta * (r / (4.0 * PI * delta).powf(3.5f64)).ln();
        let on_axis = level_radius(&GroupPoint::new(vec![0.0, 0.0], -delta), r, p, &m).unwrap();
        assert_relative_eq!(on_axis * on_axis, rho_sq, max_relative = 1e-12);

        let boundary = GroupPoint::new(vec![rho_sq.sqrt(), 0.0], -delta);
        assert!(level_radius(&boundary, r, p, &m).unwrap() < 1e-5);

        let a = level_radius(&GroupPoint::new(vec![0.1, 0.2], -delta), r, p, &m).unwrap();
        let b = level_radius(&GroupPoint::new(vec![-0.2, 0.1], -delta), r, p, &m).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-14);

        let outside = GroupPoint::new(vec![10.0, 0.0], -delta);
        assert!(matches!(level_radius(&outside, r, p, &m), Err(Error::Domain(_))));
        assert!(level_radius(&GroupPoint::new(vec![0.0, 0.0], 0.5), r, p, &m).is_err());
    }

    #[test]
    fn weight_examples() {
        let m = DriftModel::rotation(1.0);
        let (r, p) = (2.0, 5u32);
        let delta = 0.05;
        let rho_sq = 4.0 * delta * (r / (4.0 * PI * delta).powf(3.5f64)).ln();
        let w = onion_weight(&GroupPoint::new(vec![0.0, 0.0], -delta), r, p, &m).unwrap();
        let omega5 = 8.0 * PI * PI / 15.0;
        let expected = omega5 * rho_sq.powf(2.5) * (5.0 / 28.0) * rho_sq / (delta * delta);
        assert_relative_eq!(w, expected, max_relative = 1e-12);

        let edge = GroupPoint::new(vec![0.0, rho_sq.sqrt()], -delta);
        assert!(onion_weight(&edge, r, p, &m).unwrap() < 1e-10);
        assert!(onion_weight(&GroupPoint::new(vec![5.0, 0.0], -delta), r, p, &m).is_err());
    }

    #[test]
    fn constant_field_normalizes() {
        let cfg = QuadratureConfig::grid(60, 400);
        let rep = onion_volume_weight_check(&spec(1.0), &cfg).unwrap();
        assert!(rep.deviation < 1e-3, "{rep:?}");
    }

    #[test]
    fn domain_and_empty_errors() {
        let cfg = QuadratureConfig::grid(10, 16);
        let half = FnField::new("half-space", |_, _| 1.0).with_floor(-0.01);
        assert!(matches!(mean_value(&half, &spec(10.0), &cfg), Err(Error::Domain(_))));
        let tiny = OnionSpec::new(GroupPoint::new(vec![0.0, 0.0], 1.0), 1e-320, 5, DriftModel::rotation(1.0)).unwrap();
        let one = FnField::new("one", |_, _| 1.0);
        assert!(matches!(mean_value(&one, &tiny, &cfg), Err(Error::EmptyOnion(_))));
        let bad = QuadratureConfig::grid(0, 16);
        assert!(mean_value(&one, &spec(1.0), &bad).is_err());
    }

    #[test]
    fn sampled_points_are_inside() {
        let s = OnionSpec::new(GroupPoint::new(vec![0.5, 0.1], -0.3), 2.0, 5, DriftModel::rotation(0.7)).unwrap();
        let mut rng = par::stream_rng(3, 0);
        for _ in 0..500 {
            assert!(s.contains(&sample_onion(&s, &mut rng)));
        }
    }
}
