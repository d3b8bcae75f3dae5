//! Harmonic test corpora, the kernel estimates behind the global Harnack
//! inequality `u(z) ≤ C u(z0)` on `P(z0)`, the inequality itself on sampled
//! paraboloids, and the Liouville limit at `t → −∞`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{DriftModel, GroupPoint};
use crate::linalg;
use crate::mvf::{self, OnionSpec, SolutionField};
use crate::onion::{self, covariant_draws, covariant_onion_points};
use crate::par::{self, Execution};
use crate::quadrature;
use crate::stats;

/// Paraboloid truncation depth for Harnack sampling.
pub const PARABOLOID_DEPTH: f64 = 50.0;
/// Finite-difference step and residual tolerance of the harmonicity audit.
pub const FD_STEP: f64 = 1e-3;
pub const FD_TOL: f64 = 1e-4;

// ---------------------------------------------------------------------------
// Corpus

/// `u ≡ c`.
#[derive(Debug, Clone)]
pub struct ConstantField(pub f64);

impl SolutionField for ConstantField {
    fn eval(&self, _: &[f64], _: f64) -> f64 {
        self.0
    }
    fn label(&self) -> String {
        format!("constant {}", self.0)
    }
}

/// `u = |x|² + 2Nt + shift`.
#[derive(Debug, Clone)]
pub struct QuadraticField {
    pub dim: usize,
    pub shift: f64,
}

impl SolutionField for QuadraticField {
    fn eval(&self, x: &[f64], t: f64) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>() + 2.0 * self.dim as f64 * t + self.shift
    }
    fn label(&self) -> String {
        format!("|x|^2 + {}t + {}", 2 * self.dim, self.shift)
    }
}

/// `u = exp(⟨b, x⟩ + |b|² t)` with `Bb = 0`.
#[derive(Debug, Clone)]
pub struct ExponentialField {
    pub b: Vec<f64>,
}

impl SolutionField for ExponentialField {
    fn eval(&self, x: &[f64], t: f64) -> f64 {
        let dot: f64 = self.b.iter().zip(x).map(|(a, b)| a * b).sum();
        let b_sq: f64 = self.b.iter().map(|v| v * v).sum();
        (dot + b_sq * t).exp()
    }
    fn label(&self) -> String {
        format!("exp(<b,x> + |b|^2 t), b = {:?}", self.b)
    }
}

/// `u = exp(⟨E(t)b, x⟩ + |b|² t)` for any `b`: a positive global solution even
/// when `ker B` is trivial. Reduces to [`ExponentialField`] when `Bb = 0`.
#[derive(Debug, Clone)]
pub struct RotatingExponential {
    pub model: DriftModel,
    pub b: Vec<f64>,
}

impl SolutionField for RotatingExponential {
    fn eval(&self, x: &[f64], t: f64) -> f64 {
        self.at_time(t)(x)
    }
    fn label(&self) -> String {
        format!("exp(<E(t)b,x> + |b|^2 t), b = {:?}", self.b)
    }
    fn at_time<'a>(&'a self, t: f64) -> Box<dyn Fn(&[f64]) -> f64 + 'a> {
        let c = self.model.apply_propagator(t, &DVector::from_column_slice(&self.b));
        let b_sq: f64 = self.b.iter().map(|v| v * v).sum();
        Box::new(move |x| (x.iter().zip(c.iter()).map(|(a, b)| a * b).sum::<f64>() + b_sq * t).exp())
    }
}

/// `u = Σ w_k Γ(·, ζ_k)` with all poles at the same time `τ0`; defined on `t > τ0`.
/// The corpus uses convex weights.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    pub model: DriftModel,
    pub poles: Vec<(f64, GroupPoint)>,
}

impl GaussianMixture {
    fn floor(&self) -> f64 {
        self.poles.iter().map(|(_, z)| z.t).fold(f64::NEG_INFINITY, f64::max)
    }
}

impl SolutionField for GaussianMixture {
    fn eval(&self, x: &[f64], t: f64) -> f64 {
        self.at_time(t)(x)
    }
    fn label(&self) -> String {
        format!("gaussian mixture of {} poles at t = {}", self.poles.len(), self.floor())
    }
    fn domain_floor(&self) -> f64 {
        self.floor()
    }
    fn at_time<'a>(&'a self, t: f64) -> Box<dyn Fn(&[f64]) -> f64 + 'a> {
        let n = self.model.dim() as f64;
        // Per pole: weight·(4π(t−τ))^{−N/2}, 4(t−τ) and E(t−τ)ξ.
        let parts: Vec<(f64, f64, DVector<f64>)> = self
            .poles
            .iter()
            .filter(|(_, z)| t > z.t)
            .map(|(w, z)| {
                let d = t - z.t;
                (w * (4.0 * PI * d).powf(-0.5 * n), 4.0 * d, self.model.apply_propagator(d, &z.x))
            })
            .collect();
        Box::new(move |x| {
            parts
                .iter()
                .map(|(c, four_d, mu)| {
                    let q: f64 = x.iter().zip(mu.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                    c * (-q / four_d).exp()
                })
                .sum()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Constant,
    Quadratic,
    Exponential,
    Gaussian,
    Rotating,
}

/// A corpus member with the metadata the Harnack and Liouville runs need.
#[derive(Clone)]
pub struct FamilyMember {
    pub field: Arc<dyn SolutionField>,
    pub nonnegative: bool,
    pub global: bool,
    pub bounded_below: bool,
    pub bounded_above: bool,
    pub constant: bool,
    /// Infimum over the domain, when known in closed form.
    pub infimum: Option<f64>,
}

pub struct HarmonicFamily {
    pub kind: FamilyKind,
    pub members: Vec<FamilyMember>,
}

/// Builds the corpus members of `kind` for the antisymmetric drift `model`.
pub fn test_family(model: &DriftModel, kind: FamilyKind) -> Result<HarmonicFamily> {
    model.require_antisymmetric()?;
    let n = model.dim();
    let members = match kind {
        FamilyKind::Constant => [0.5, 1.0, 3.0]
            .iter()
            .map(|&c| FamilyMember {
                field: Arc::new(ConstantField(c)),
                nonnegative: true,
                global: true,
                bounded_below: true,
                bounded_above: true,
                constant: true,
                infimum: Some(c),
            })
            .collect(),
        FamilyKind::Quadratic => [0.0, 1.0]
            .iter()
            .map(|&shift| FamilyMember {
                field: Arc::new(QuadraticField { dim: n, shift }),
                nonnegative: false,
                global: true,
                bounded_below: false,
                bounded_above: false,
                constant: false,
                infimum: None,
            })
            .collect(),
        FamilyKind::Exponential => {
            let kernel = linalg::null_space(model.drift(), 1e-10);
            if kernel.is_empty() {
                return Err(Error::TrivialKernel);
            }
            kernel
                .iter()
                .flat_map(|b| [b.clone(), -b])
                .map(|b| FamilyMember {
                    field: Arc::new(ExponentialField { b: b.iter().cloned().collect() }),
                    nonnegative: true,
                    global: true,
                    bounded_below: true,
                    bounded_above: false,
                    constant: false,
                    infimum: Some(0.0),
                })
                .collect()
        }
        FamilyKind::Rotating => {
            let mut e1 = vec![0.0; n];
            e1[0] = 1.0;
            [1.0, -1.0]
                .iter()
                .map(|&sign| FamilyMember {
                    field: Arc::new(RotatingExponential { model: model.clone(), b: e1.iter().map(|v| sign * v).collect() }),
                    nonnegative: true,
                    global: true,
                    bounded_below: true,
                    bounded_above: false,
                    constant: false,
                    infimum: Some(0.0),
                })
                .collect()
        }
        FamilyKind::Gaussian => {
            let tau0 = -1.0;
            let single = GaussianMixture { model: model.clone(), poles: vec![(1.0, GroupPoint::new(vec![0.0; n], tau0))] };
            let mut e1 = vec![0.0; n];
            e1[0] = 1.0;
            let mut e2 = vec![0.0; n];
            e2[n - 1] = -0.5;
            let mixture = GaussianMixture {
                model: model.clone(),
                poles: vec![
                    (0.5, GroupPoint::new(vec![0.0; n], tau0)),
                    (0.2, GroupPoint::new(e1, tau0)),
                    (0.3, GroupPoint::new(e2, tau0)),
                ],
            };
            [single, mixture]
                .into_iter()
                .map(|g| FamilyMember {
                    field: Arc::new(g),
                    nonnegative: true,
                    global: false,
                    bounded_below: true,
                    bounded_above: false,
                    constant: false,
                    infimum: Some(0.0),
                })
                .collect()
        }
    };
    Ok(HarmonicFamily { kind, members })
}

/// Largest finite-difference residual of `Lu` at `n` random points of the
/// member's domain (`t > floor + 0.1` for half-space members).
pub fn harmonicity_residual(model: &DriftModel, u: &dyn SolutionField, n: usize, seed: u64) -> f64 {
    let mut rng = par::stream_rng(seed, 0);
    let floor = u.domain_floor();
    let dim = model.dim();
    (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
            let t = if floor.is_finite() {
                floor + 0.1 + rng.random_range(0.0..2.0)
            } else {
                rng.random_range(-2.0..2.0)
            };
            model.kolmogorov_residual(|x, t| u.eval(x, t), &x, t, FD_STEP).abs()
        })
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Kernel estimates

/// `(p − 2)/(N + p)`, the scaling exponent of the kernel bounds in `r`.
pub fn scaling_exponent(dim: usize, p: u32) -> f64 {
    (p as f64 - 2.0) / (dim as u32 + p) as f64
}

/// Sampling plan shared by the kernel-bound sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSampling {
    /// Random `Σ_r` points per `r` (two deterministic extremes are added).
    pub sigma_points: usize,
    /// Points of each `Ω_r^(p)(z)`.
    pub onion_points: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for KernelSampling {
    fn default() -> Self {
        Self { sigma_points: 16, onion_points: 1024, seed: 1, execution: Execution::Parallel }
    }
}

fn require_p(p: u32) -> Result<()> {
    if p <= 4 {
        return Err(Error::InvalidInput(format!("kernel bounds need p > 4, got {p}")));
    }
    Ok(())
}

/// Per-sample kernel values for one `r`.
struct KernelSample {
    /// `W_{2θr}^(p)(ζ)` (centre `z0 = 0`)
    outer: f64,
    /// `W_r^(p)(z⁻¹ ∘ ζ)`
    inner: f64,
    k1: f64,
    k2: f64,
}

fn kernel_samples(r: f64, p: u32, model: &DriftModel, plan: &KernelSampling) -> Result<Vec<KernelSample>> {
    require_p(p)?;
    model.require_antisymmetric()?;
    let theta = onion::analytic_theta(model.dim(), p);
    let sigma = onion::sigma_sample(r, model, p, plan.sigma_points, plan.seed);
    let draws = covariant_draws(model.dim(), plan.onion_points, plan.seed);
    let origin = GroupPoint::origin(model.dim());
    let per_z: Vec<Result<Vec<KernelSample>>> = par::map_indexed(plan.execution, sigma.len(), |i| {
        let z = &sigma[i];
        let spec = OnionSpec::new(z.clone(), r, p, model.clone())?;
        let z_inv = model.inverse(z)?;
        covariant_onion_points(&spec, &draws)
            .into_iter()
            .map(|(zeta, _, _, _)| {
                if model.log_scaled_fundamental_solution(&origin, &zeta, p) + (2.0 * theta * r).ln() <= 0.0 {
                    return Err(Error::Domain(format!(
                        "sample of Ω_r(z) at t = {} escapes Ω_(2θr)(0)",
                        zeta.t
                    )));
                }
                let outer = mvf::onion_weight(&zeta, 2.0 * theta * r, p, model)?;
                let rel = model.compose(&z_inv, &zeta)?;
                let big_r = mvf::level_radius(&rel, r, p, model)?;
                let w = mvf::spatial_kernel(&rel)?;
                let k1 = big_r.powi(p as i32) * w;
                let k2 = big_r.powi(p as i32 + 2) / (rel.t * rel.t);
                let inner = mvf::onion_weight(&rel, r, p, model)?;
                Ok(KernelSample { outer, inner, k1, k2 })
            })
            .collect()
    });
    let mut out = Vec::new();
    for v in per_z {
        out.extend(v?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBoundReport {
    pub r: f64,
    pub theta: f64,
    pub min_weight: f64,
    /// `min_weight / r^{(p−2)/(N+p)}`
    pub normalized: f64,
}

/// `min W_{2θr}^(p)(ζ)` over `ζ ∈ Ω_r^(p)(z)`, `z ∈ Σ_r`, with `θ = θ_analytic`.
pub fn kernel_lower_bound(r: f64, p: u32, model: &DriftModel, plan: &KernelSampling) -> Result<LowerBoundReport> {
    let s = kernel_samples(r, p, model, plan)?;
    let min_weight = s.iter().map(|k| k.outer).fold(f64::INFINITY, f64::min);
    Ok(LowerBoundReport {
        r,
        theta: onion::analytic_theta(model.dim(), p),
        min_weight,
        normalized: min_weight / r.powf(scaling_exponent(model.dim(), p)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpperBoundReport {
    pub r: f64,
    pub max_k1: f64,
    pub max_k2: f64,
    pub max_weight: f64,
    /// `ω_p (max K1 + p/(4(p+2)) max K2)`, which dominates every sampled weight.
    pub assembled: f64,
    pub k1_normalized: f64,
    pub k2_normalized: f64,
    /// Largest `|W − ω_p(K1 + p/(4(p+2))K2)|` relative to `W`.
    pub recombination_defect: f64,
}

/// `max K1`, `max K2` and `max W_r^(p)(z⁻¹∘ζ)` over `ζ ∈ Ω_r^(p)(z)`, `z ∈ Σ_r`.
pub fn kernel_upper_bound(r: f64, p: u32, model: &DriftModel, plan: &KernelSampling) -> Result<UpperBoundReport> {
    let s = kernel_samples(r, p, model, plan)?;
    let omega = quadrature::unit_ball_volume(p as usize);
    let c = p as f64 / (4.0 * (p as f64 + 2.0));
    let max_k1 = s.iter().map(|k| k.k1).fold(0.0, f64::max);
    let max_k2 = s.iter().map(|k| k.k2).fold(0.0, f64::max);
    let max_weight = s.iter().map(|k| k.inner).fold(0.0, f64::max);
    let recombination_defect = s
        .iter()
        .filter(|k| k.inner > 0.0)
        .map(|k| (k.inner - omega * (k.k1 + c * k.k2)).abs() / k.inner)
        .fold(0.0, f64::max);
    let scale = r.powf(scaling_exponent(model.dim(), p));
    Ok(UpperBoundReport {
        r,
        max_k1,
        max_k2,
        max_weight,
        assembled: omega * (max_k1 + c * max_k2),
        k1_normalized: max_k1 / scale,
        k2_normalized: max_k2 / scale,
        recombination_defect,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioReport {
    pub r: f64,
    pub theta: f64,
    /// `min W_{2θr}^(p)(ζ) / W_r^(p)(z⁻¹∘ζ)`
    pub min_ratio: f64,
    /// `2θ / min_ratio`
    pub constant: f64,
}

pub fn ratio_bound(r: f64, p: u32, model: &DriftModel, plan: &KernelSampling) -> Result<RatioReport> {
    let s = kernel_samples(r, p, model, plan)?;
    let theta = onion::analytic_theta(model.dim(), p);
    let min_ratio = s
        .iter()
        .filter(|k| k.inner > 0.0)
        .map(|k| k.outer / k.inner)
        .fold(f64::INFINITY, f64::min);
    Ok(RatioReport { r, theta, min_ratio, constant: 2.0 * theta / min_ratio })
}

/// Kernel bounds over an `r` sweep, with log-log slopes and assembled constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSweep {
    pub dim: usize,
    pub p: u32,
    pub exponent: f64,
    pub lower: Vec<LowerBoundReport>,
    pub upper: Vec<UpperBoundReport>,
    pub ratio: Vec<RatioReport>,
    pub slope_lower: f64,
    pub slope_k1: f64,
    pub slope_k2: f64,
    /// `2θ / min ratio` over the whole sweep: the empirical Harnack constant.
    pub harnack_constant: f64,
    /// `2θ · max_r(max W_r / r^e) / min_r(min W_{2θr} / r^e)` from the separate bounds.
    pub assembled_constant: f64,
}

pub fn kernel_sweep(r_grid: &[f64], p: u32, model: &DriftModel, plan: &KernelSampling) -> Result<KernelSweep> {
    if r_grid.len() < 2 {
        return Err(Error::InvalidInput("a slope needs at least two radii".into()));
    }
    let dim = model.dim();
    let exponent = scaling_exponent(dim, p);
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut ratio = Vec::new();
    for &r in r_grid {
        lower.push(kernel_lower_bound(r, p, model, plan)?);
        upper.push(kernel_upper_bound(r, p, model, plan)?);
        ratio.push(ratio_bound(r, p, model, plan)?);
    }
    let logr: Vec<f64> = r_grid.iter().map(|r| r.ln()).collect();
    let slope = |ys: Vec<f64>| stats::linear_fit(&logr, &ys).0;
    let theta = onion::analytic_theta(dim, p);
    let min_ratio = ratio.iter().map(|r| r.min_ratio).fold(f64::INFINITY, f64::min);
    let max_upper = upper
        .iter()
        .map(|u| u.max_weight / u.r.powf(exponent))
        .fold(0.0, f64::max);
    let min_lower = lower.iter().map(|l| l.normalized).fold(f64::INFINITY, f64::min);
    Ok(KernelSweep {
        dim,
        p,
        exponent,
        slope_lower: slope(lower.iter().map(|l| l.min_weight.ln()).collect()),
        slope_k1: slope(upper.iter().map(|u| u.max_k1.ln()).collect()),
        slope_k2: slope(upper.iter().map(|u| u.max_k2.ln()).collect()),
        harnack_constant: 2.0 * theta / min_ratio,
        assembled_constant: 2.0 * theta * max_upper / min_lower,
        lower,
        upper,
        ratio,
    })
}

// ---------------------------------------------------------------------------
// Harnack inequality on sampled paraboloids

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnackReport {
    pub label: String,
    pub z0_x: Vec<f64>,
    pub z0_t: f64,
    pub u_z0: f64,
    /// Largest `u(z)/u(z0)` found over the sampled (and locally refined) paraboloid.
    pub sup_ratio: f64,
    pub argmax_x: Vec<f64>,
    pub argmax_t: f64,
    pub constant: f64,
    pub pass: bool,
    pub samples: usize,
    pub depth_limit: f64,
    /// Half-space member: only paraboloid points whose onions stay in the
    /// domain were used, so this is restricted-domain evidence.
    pub restricted_domain: bool,
    /// `u(z0) = 0`; `pass` then records whether `u` vanished on every sample.
    pub degenerate: bool,
}

/// Deepest paraboloid point `z` for which `Ω_{2θr}(z0)` (and so `Ω_r(z)`)
/// stays above `floor`.
pub fn admissible_depth(z0_t: f64, floor: f64, dim: usize, p: u32) -> f64 {
    if !floor.is_finite() {
        return PARABOLOID_DEPTH;
    }
    let theta = onion::analytic_theta(dim, p);
    let n = (dim as u32 + p) as f64;
    let d = (z0_t - floor) * 4.0 * PI / (2.0 * theta).powf(2.0 / n);
    (d * (1.0 - 1e-9)).clamp(0.0, PARABOLOID_DEPTH)
}

/// Relative paraboloid coordinates: `z = z0 ∘ (y, −d)` with `|y|² < 4d`.
fn paraboloid_point(model: &DriftModel, z0: &GroupPoint, y: &[f64], d: f64) -> GroupPoint {
    let x = DVector::from_column_slice(y) + model.apply_propagator(-d, &z0.x);
    GroupPoint { x, t: z0.t - d }
}

/// Unconstrained parametrisation `(η, β) ↦ (y, d)` of the truncated paraboloid.
fn decode(params: &[f64], depth: f64) -> (Vec<f64>, f64) {
    let n = params.len() - 1;
    let d = depth / (1.0 + (-params[n]).exp());
    let eta_sq: f64 = params[..n].iter().map(|v| v * v).sum();
    let s = 2.0 * d.sqrt() / (1.0 + eta_sq).sqrt();
    (params[..n].iter().map(|v| v * s).collect(), d)
}

/// Samples `u(z)/u(z0)` over `P(z0)` truncated at `depth_limit`, then polishes
/// the best samples with a compass search that stays inside `P(z0)`.
pub fn harnack_verify(
    u: &dyn SolutionField,
    model: &DriftModel,
    z0: &GroupPoint,
    n_samples: usize,
    seed: u64,
    constant: f64,
    p: u32,
) -> Result<HarnackReport> {
    model.require_antisymmetric()?;
    let dim = model.dim();
    let floor = u.domain_floor();
    if !(z0.t > floor) {
        return Err(Error::Domain(format!("z0 at t = {} is outside {}", z0.t, u.label())));
    }
    let depth = admissible_depth(z0.t, floor, dim, p);
    let u0 = u.eval(z0.x.as_slice(), z0.t);
    let ratio = |y: &[f64], d: f64| {
        let z = paraboloid_point(model, z0, y, d);
        u.eval(z.x.as_slice(), z.t)
    };

    // Uniform in volume (depth density ∝ d^{N/2}) for half the samples, and
    // near the lateral boundary for the rest.
    let mut rng = par::stream_rng(seed, 0);
    let mut samples: Vec<(f64, Vec<f64>, f64)> = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let d = depth * rng.random::<f64>().powf(2.0 / (dim as f64 + 2.0)).max(1e-12);
        let (mut s, dir) = quadrature::random_in_unit_ball(&mut rng, dim);
        if i % 2 == 1 {
            s = 1.0 - 1e-3 * rng.random::<f64>();
        }
        let s = s.min(1.0 - 1e-12);
        let y: Vec<f64> = dir.iter().map(|v| v * s * 2.0 * d.sqrt()).collect();
        let v = ratio(&y, d);
        samples.push((v, y, d));
    }
    let mut best = samples
        .iter()
        .cloned()
        .fold((f64::NEG_INFINITY, vec![0.0; dim], 0.0), |a, b| if b.0 > a.0 { b } else { a });

    let degenerate = u0 == 0.0;
    if !degenerate {
        samples.sort_by(|a, b| b.0.total_cmp(&a.0));
        for (_, y, d) in samples.iter().take(8) {
            let (v, y, d) = compass_refine(&ratio, y, *d, depth);
            if v > best.0 {
                best = (v, y, d);
            }
        }
    }
    let argmax = paraboloid_point(model, z0, &best.1, best.2);
    let (sup_ratio, pass) = if degenerate {
        (f64::NAN, best.0 <= 0.0)
    } else {
        let s = best.0 / u0;
        (s, s <= constant)
    };
    Ok(HarnackReport {
        label: u.label(),
        z0_x: z0.x.iter().cloned().collect(),
        z0_t: z0.t,
        u_z0: u0,
        sup_ratio,
        argmax_x: argmax.x.iter().cloned().collect(),
        argmax_t: argmax.t,
        constant,
        pass,
        samples: n_samples,
        depth_limit: depth,
        restricted_domain: floor.is_finite(),
        degenerate,
    })
}

/// Compass search with step expansion on the unconstrained parametrisation.
fn compass_refine<F: Fn(&[f64], f64) -> f64>(f: &F, y: &[f64], d: f64, depth: f64) -> (f64, Vec<f64>, f64) {
    let n = y.len();
    // invert decode: d = depth·σ(β), y = 2√d η/√(1+|η|²)
    let frac = (d / depth).clamp(1e-12, 1.0 - 1e-12);
    let beta = (frac / (1.0 - frac)).ln();
    let s_sq = y.iter().map(|v| v * v).sum::<f64>() / (4.0 * d);
    let s_sq = s_sq.min(1.0 - 1e-12);
    let k = 1.0 / (2.0 * d.sqrt() * (1.0 - s_sq).sqrt());
    let mut params: Vec<f64> = y.iter().map(|v| v * k).collect();
    params.push(beta);
    let eval = |p: &[f64]| {
        let (y, d) = decode(p, depth);
        f(&y, d)
    };
    let mut best = eval(&params);
    let mut steps: Vec<f64> = params.iter().map(|v| 0.1 * v.abs().max(1.0)).collect();
    for _ in 0..20_000 {
        let mut improved = false;
        for i in 0..=n {
            for sign in [1.0, -1.0] {
                let mut cand = params.clone();
                cand[i] += sign * steps[i];
                let v = eval(&cand);
                if v > best {
                    best = v;
                    params = cand;
                    steps[i] *= 2.0;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            for s in steps.iter_mut() {
                *s *= 0.5;
            }
            if steps.iter().zip(&params).all(|(s, p)| *s < 1e-12 * p.abs().max(1.0)) {
                break;
            }
        }
    }
    let (y, d) = decode(&params, depth);
    (best, y, d)
}

// ---------------------------------------------------------------------------
// Liouville at t = −∞

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiouvilleRow {
    pub x: Vec<f64>,
    pub t: f64,
    pub u: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiouvilleTable {
    pub label: String,
    pub infimum: f64,
    pub epsilon: f64,
    pub rows: Vec<LiouvilleRow>,
    /// Per `x`: the largest grid time below which every gap is `≤ ε`.
    pub thresholds: Vec<Option<f64>>,
}

impl LiouvilleTable {
    pub fn converged(&self) -> bool {
        self.thresholds.iter().all(Option::is_some)
    }
}

/// Tabulates `u(x, t_k) − inf u` along a descending time grid.
pub fn liouville_limit_demo(
    u: &dyn SolutionField,
    infimum: f64,
    x_list: &[Vec<f64>],
    t_grid: &[f64],
    epsilon: f64,
) -> Result<LiouvilleTable> {
    if t_grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidInput("time grid must be strictly descending".into()));
    }
    let mut rows = Vec::new();
    let mut thresholds = Vec::new();
    for x in x_list {
        let gaps: Vec<f64> = t_grid.iter().map(|&t| u.eval(x, t) - infimum).collect();
        // Walk up from the deepest time while the gap stays small.
        let mut threshold = None;
        for (k, &t) in t_grid.iter().enumerate().rev() {
            if gaps[k] <= epsilon {
                threshold = Some(t);
            } else {
                break;
            }
        }
        thresholds.push(threshold);
        rows.extend(t_grid.iter().zip(&gaps).map(|(&t, &gap)| LiouvilleRow { x: x.clone(), t, u: gap + infimum, gap }));
    }
    Ok(LiouvilleTable { label: u.label(), infimum, epsilon, rows, thresholds })
}

/// Members bounded on both sides; every one of them must be constant.
pub fn bounded_members(family: &HarmonicFamily) -> Vec<&FamilyMember> {
    family.members.iter().filter(|m| m.bounded_below && m.bounded_above).collect()
}
