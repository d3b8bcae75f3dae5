//! Drift models, the propagator `E(τ) = exp(−τB)`, the Lie group law on
//! `R^{N+1}`, the fundamental solution of `Δ + ⟨Bx, ∇⟩ − ∂t`, and paraboloid
//! membership.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Entry-wise tolerance for deciding that `B` is antisymmetric.
pub const ANTISYMMETRY_TOL: f64 = 1e-12;

/// The matrix `B` of the drift `⟨Bx, ∇⟩` and the diffusion matrix `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftModel {
    b: DMatrix<f64>,
    q: DMatrix<f64>,
    antisymmetric: bool,
    zero_drift: bool,
}

impl DriftModel {
    /// Drift `B` with identity diffusion.
    pub fn new(b: DMatrix<f64>) -> Result<Self> {
        let n = b.nrows();
        Self::with_diffusion(b, DMatrix::identity(n, n))
    }

    pub fn with_diffusion(b: DMatrix<f64>, q: DMatrix<f64>) -> Result<Self> {
        if b.nrows() == 0 || !b.is_square() {
            return Err(Error::InvalidInput(format!(
                "drift matrix must be square and non-empty, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        if q.shape() != b.shape() {
            return Err(Error::InvalidInput(format!(
                "diffusion matrix must be {n}x{n}, got {}x{}",
                q.nrows(),
                q.ncols(),
                n = b.nrows()
            )));
        }
        if b.iter().chain(q.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite matrix entry".into()));
        }
        if linalg::symmetry_defect(&q) != 0.0 {
            return Err(Error::InvalidInput("diffusion matrix must be symmetric".into()));
        }
        let antisymmetric = linalg::antisymmetry_defect(&b) <= ANTISYMMETRY_TOL;
        let zero_drift = b.iter().all(|&v| v == 0.0);
        Ok(Self { b, q, antisymmetric, zero_drift })
    }

    /// Row-major convenience constructor with identity diffusion.
    pub fn from_rows(n: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "expected {} drift entries, got {}",
                n * n,
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(n, n, entries))
    }

    /// `B = 0` in dimension `n`.
    pub fn zero(n: usize) -> Self {
        Self::new(DMatrix::zeros(n, n)).expect("zero drift is valid")
    }

    /// The planar rotation generator `[[0, −α], [α, 0]]`.
    pub fn rotation(alpha: f64) -> Self {
        Self::from_rows(2, &[0.0, -alpha, alpha, 0.0]).expect("finite rotation")
    }

    /// The 3×3 cross-product matrix `v ↦ w × v`; its kernel is spanned by `w`.
    pub fn cross_product(w: [f64; 3]) -> Self {
        let [a, b, c] = w;
        Self::from_rows(3, &[0.0, -c, b, c, 0.0, -a, -b, a, 0.0]).expect("finite axis")
    }

    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    pub fn drift(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn diffusion(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn is_antisymmetric(&self) -> bool {
        self.antisymmetric
    }

    pub fn require_antisymmetric(&self) -> Result<()> {
        if self.antisymmetric {
            Ok(())
        } else {
            Err(Error::NotAntisymmetric(linalg::antisymmetry_defect(&self.b)))
        }
    }

    /// `E(τ) = exp(−τB)`.
    pub fn propagator(&self, tau: f64) -> Result<Propagator> {
        if !tau.is_finite() {
            return Err(Error::InvalidInput(format!("propagator time must be finite, got {tau}")));
        }
        Ok(Propagator { tau, matrix: self.exp_neg(tau) })
    }

    /// `exp(sB)`, the flow of the drift used by the stochastic process.
    pub fn flow(&self, s: f64) -> DMatrix<f64> {
        self.exp_neg(-s)
    }

    fn exp_neg(&self, tau: f64) -> DMatrix<f64> {
        let n = self.dim();
        if self.zero_drift || tau == 0.0 {
            return DMatrix::identity(n, n);
        }
        linalg::expm(&(&self.b * -tau)).expect("finite drift and time")
    }

    /// `E(τ)·v`.
    pub fn apply_propagator(&self, tau: f64, v: &DVector<f64>) -> DVector<f64> {
        if self.zero_drift || tau == 0.0 {
            return v.clone();
        }
        self.exp_neg(tau) * v
    }

    fn check_dim(&self, z: &GroupPoint) -> Result<()> {
        if z.x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: z.x.len() });
        }
        Ok(())
    }

    /// `(x, t) ∘ (y, τ) = (y + E(τ)x, t + τ)`.
    pub fn compose(&self, a: &GroupPoint, b: &GroupPoint) -> Result<GroupPoint> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        Ok(GroupPoint { x: &b.x + self.apply_propagator(b.t, &a.x), t: a.t + b.t })
    }

    /// `(x, t)⁻¹ = (−E(−t)x, −t)`.
    pub fn inverse(&self, z: &GroupPoint) -> Result<GroupPoint> {
        self.check_dim(z)?;
        Ok(GroupPoint { x: -self.apply_propagator(-z.t, &z.x), t: -z.t })
    }

    /// Fundamental solution `Γ(z, ζ) = γ(ζ⁻¹ ∘ z)`:
    /// `(4π(t−τ))^{−N/2} exp(−|x − E(t−τ)ξ|² / (4(t−τ)))` for `t > τ`, else 0.
    pub fn fundamental_solution(&self, z: &GroupPoint, zeta: &GroupPoint) -> f64 {
        self.log_fundamental_solution(z, zeta).exp()
    }

    /// `log Γ(z, ζ)`, `−∞` when `t ≤ τ`.
    pub fn log_fundamental_solution(&self, z: &GroupPoint, zeta: &GroupPoint) -> f64 {
        assert_eq!(z.x.len(), zeta.x.len(), "points of different dimension");
        let d = z.t - zeta.t;
        if d <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let diff = &z.x - self.apply_propagator(d, &zeta.x);
        -0.5 * self.dim() as f64 * (4.0 * PI * d).ln() - diff.norm_squared() / (4.0 * d)
    }

    /// `φ_p(z0, z) = Γ(z0, z) / (4π(t0 − t))^{p/2}`; zero when `t ≥ t0`.
    pub fn scaled_fundamental_solution(&self, z0: &GroupPoint, z: &GroupPoint, p: u32) -> f64 {
        self.log_scaled_fundamental_solution(z0, z, p).exp()
    }

    pub fn log_scaled_fundamental_solution(&self, z0: &GroupPoint, z: &GroupPoint, p: u32) -> f64 {
        let d = z0.t - z.t;
        if d <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.log_fundamental_solution(z0, z) - 0.5 * p as f64 * (4.0 * PI * d).ln()
    }

    /// Paraboloid quotient `|x − E(t−t0)x0|² / (4(t0 − t))`; `+∞` when `t ≥ t0`.
    pub fn paraboloid_quotient(&self, z: &GroupPoint, z0: &GroupPoint) -> f64 {
        let d = z0.t - z.t;
        if d <= 0.0 {
            return f64::INFINITY;
        }
        let diff = &z.x - self.apply_propagator(-d, &z0.x);
        diff.norm_squared() / (4.0 * d)
    }

    /// `z ∈ P(z0) = z0 ∘ {t < −|x|²/4}`.
    pub fn in_paraboloid(&self, z: &GroupPoint, z0: &GroupPoint) -> bool {
        self.paraboloid_quotient(z, z0) < 1.0
    }

    /// `T(x, z0) = t0 − (|x| + |x0|)²/4`: every `(x, t)` with `t < T` lies in `P(z0)`.
    pub fn paraboloid_entry_time(&self, x: &DVector<f64>, z0: &GroupPoint) -> f64 {
        let s = x.norm() + z0.x.norm();
        z0.t - s * s / 4.0
    }

    /// `Δu + ⟨Bx, ∇u⟩ − ∂t u` at `(x, t)` by second-order central differences.
    pub fn kolmogorov_residual<F>(&self, u: F, x: &[f64], t: f64, h: f64) -> f64
    where
        F: Fn(&[f64], f64) -> f64,
    {
        let n = self.dim();
        let u0 = u(x, t);
        let mut y = x.to_vec();
        let mut lap = 0.0;
        let mut grad = vec![0.0; n];
        for i in 0..n {
            y[i] = x[i] + h;
            let up = u(&y, t);
            y[i] = x[i] - h;
            let um = u(&y, t);
            y[i] = x[i];
            lap += (up - 2.0 * u0 + um) / (h * h);
            grad[i] = (up - um) / (2.0 * h);
        }
        let bx = &self.b * DVector::from_column_slice(x);
        let drift: f64 = bx.iter().zip(&grad).map(|(a, g)| a * g).sum();
        let dt = (u(x, t + h) - u(x, t - h)) / (2.0 * h);
        lap + drift - dt
    }
}

/// A point `z = (x, t)` of the group `(R^{N+1}, ∘)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPoint {
    pub x: DVector<f64>,
    pub t: f64,
}

impl GroupPoint {
    pub fn new(x: Vec<f64>, t: f64) -> Self {
        Self { x: DVector::from_vec(x), t }
    }

    pub fn origin(n: usize) -> Self {
        Self { x: DVector::zeros(n), t: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.iter().all(|v| v.is_finite())
    }

    /// Max-norm distance, used for group-law residuals.
    pub fn max_distance(&self, other: &GroupPoint) -> f64 {
        (&self.x - &other.x).amax().max((self.t - other.t).abs())
    }
}

/// `E(τ) = exp(−τB)` together with its time argument.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    pub tau: f64,
    pub matrix: DMatrix<f64>,
}

impl Propagator {
    /// `‖E Eᵀ − I‖_max`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.matrix.nrows();
        linalg::max_abs(&(&self.matrix * self.matrix.transpose() - DMatrix::identity(n, n)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    /// Independent oracle: plain 200-term Taylor series of `exp(A)`.
    fn taylor_oracle(a: &DMatrix<f64>) -> DMatrix<f64> {
        let n = a.nrows();
        let mut term = DMatrix::<f64>::identity(n, n);
        let mut sum = term.clone();
        for k in 1..200 {
            term = &term * a / k as f64;
            sum += &term;
        }
        sum
    }

    fn rot() -> DriftModel {
        DriftModel::rotation(1.0)
    }

    #[test]
    fn propagator_of_zero_drift_is_identity() {
        for n in 1..5 {
            let e = DriftModel::zero(n).propagator(7.3).unwrap();
            assert_eq!(e.matrix, DMatrix::identity(n, n));
        }
    }

    #[test]
    fn propagator_quarter_turn() {
        let m = rot();
        let e = m.propagator(FRAC_PI_2).unwrap().matrix;
        let oracle = taylor_oracle(&(m.drift() * -FRAC_PI_2));
        assert_relative_eq!(e, oracle, epsilon = 1e-14);
        assert_relative_eq!(e, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]), epsilon = 1e-14);
    }

    #[test]
    fn propagator_unit_time() {
        let m = rot();
        let p = m.propagator(1.0).unwrap();
        let oracle = taylor_oracle(&(m.drift() * -1.0));
        assert_relative_eq!(p.matrix, oracle, epsilon = 1e-14);
        let (c, s) = (1f64.cos(), 1f64.sin());
        assert_relative_eq!(p.matrix, DMatrix::from_row_slice(2, 2, &[c, s, -s, c]), epsilon = 1e-14);
        assert!(p.unitarity_defect() <= 1e-12);
    }

    #[test]
    fn propagator_rejects_non_finite_time() {
        assert!(rot().propagator(f64::NAN).is_err());
        assert!(rot().propagator(f64::INFINITY).is_err());
    }

    #[test]
    fn model_validation() {
        assert!(DriftModel::new(DMatrix::zeros(2, 3)).is_err());
        assert!(DriftModel::from_rows(2, &[0.0; 3]).is_err());
        assert!(DriftModel::from_rows(2, &[0.0, f64::NAN, 0.0, 0.0]).is_err());
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(DriftModel::with_diffusion(DMatrix::zeros(2, 2), q).is_err());
        assert!(rot().is_antisymmetric());
        let nil = DriftModel::from_rows(2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(!nil.is_antisymmetric());
        assert!(matches!(nil.require_antisymmetric(), Err(Error::NotAntisymmetric(_))));
    }

    #[test]
    fn compose_identities() {
        let m = rot();
        let z = GroupPoint::new(vec![0.3, -1.2], 0.7);
        let e = GroupPoint::origin(2);
        assert_eq!(m.compose(&z, &e).unwrap(), z);
        assert_eq!(m.compose(&e, &z).unwrap(), z);
    }

    #[test]
    fn compose_quarter_turn() {
        let m = rot();
        let a = GroupPoint::new(vec![1.0, 0.0], 0.0);
        let b = GroupPoint::new(vec![0.0, 0.0], FRAC_PI_2);
        let c = m.compose(&a, &b).unwrap();
        let oracle = taylor_oracle(&(m.drift() * -FRAC_PI_2)) * &a.x;
        assert_relative_eq!(c.x, oracle, epsilon = 1e-14);
        assert_relative_eq!(c.x, DVector::from_vec(vec![0.0, -1.0]), epsilon = 1e-14);
        assert_eq!(c.t, FRAC_PI_2);
    }

    #[test]
    fn compose_dimension_mismatch() {
        let a = GroupPoint::new(vec![1.0], 0.0);
        let b = GroupPoint::origin(2);
        assert!(matches!(rot().compose(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn inverse_examples() {
        let m = rot();
        let z = GroupPoint::new(vec![0.0, 0.0], 2.5);
        assert_eq!(m.inverse(&z).unwrap(), GroupPoint::new(vec![0.0, 0.0], -2.5));

        let flat = DriftModel::zero(3);
        let z = GroupPoint::new(vec![1.0, 2.0, -3.0], 0.5);
        assert_eq!(flat.inverse(&z).unwrap(), GroupPoint::new(vec![-1.0, -2.0, 3.0], -0.5));

        let z = GroupPoint::new(vec![1.0, 0.0], FRAC_PI_2);
        let inv = m.inverse(&z).unwrap();
        let oracle = -(taylor_oracle(&(m.drift() * FRAC_PI_2)) * &z.x);
        assert_relative_eq!(inv.x, oracle, epsilon = 1e-14);
        assert_relative_eq!(inv.x, DVector::from_vec(vec![0.0, -1.0]), epsilon = 1e-14);
        assert_eq!(inv.t, -FRAC_PI_2);
    }

    #[test]
    fn fundamental_solution_examples() {
        let m = rot();
        let z = GroupPoint::new(vec![0.3, 0.1], 1.0);
        assert_eq!(m.fundamental_solution(&z, &GroupPoint::new(vec![0.0, 0.0], 1.0)), 0.0);
        assert_eq!(m.fundamental_solution(&z, &GroupPoint::new(vec![0.0, 0.0], 2.0)), 0.0);

        let flat = DriftModel::zero(2);
        let g = flat.fundamental_solution(&GroupPoint::new(vec![0.0, 0.0], 1.0), &GroupPoint::origin(2));
        assert_relative_eq!(g, 1.0 / (4.0 * PI), max_relative = 1e-15);
        // 2D heat kernel with diffusivity 1
        let heat = |x: f64, y: f64, t: f64| (-(x * x + y * y) / (4.0 * t)).exp() / (4.0 * PI * t);
        let g = flat.fundamental_solution(&GroupPoint::new(vec![0.4, -0.7], 0.3), &GroupPoint::origin(2));
        assert_relative_eq!(g, heat(0.4, -0.7, 0.3), max_relative = 1e-14);
    }

    #[test]
    fn weighted_kernel_examples() {
        let flat = DriftModel::zero(2);
        let z0 = GroupPoint::origin(2);
        let below = GroupPoint::new(vec![0.0, 0.0], -1.0);
        assert_relative_eq!(
            flat.scaled_fundamental_solution(&z0, &below, 5),
            (4.0 * PI).powf(-3.5),
            max_relative = 1e-14
        );
        let above = GroupPoint::new(vec![0.0, 0.0], 0.0);
        assert_eq!(flat.scaled_fundamental_solution(&z0, &above, 5), 0.0);
    }

    #[test]
    fn paraboloid_examples() {
        let m = DriftModel::zero(3);
        let z0 = GroupPoint::origin(3);
        assert!(m.in_paraboloid(&GroupPoint::new(vec![0.0; 3], -1.0), &z0));
        // |x|² = −4t exactly: boundary excluded
        assert!(!m.in_paraboloid(&GroupPoint::new(vec![2.0, 0.0, 0.0], -1.0), &z0));
        assert!(!m.in_paraboloid(&GroupPoint::new(vec![0.0; 3], 0.0), &z0));
    }

    #[test]
    fn paraboloid_entry_time_witness() {
        let m = rot();
        let z0 = GroupPoint::new(vec![1.5, -0.5], 2.0);
        let x = DVector::from_vec(vec![-3.0, 4.0]);
        let big_t = m.paraboloid_entry_time(&x, &z0);
        let mut t = big_t - 1e-9;
        while t > big_t - 500.0 {
            assert!(m.in_paraboloid(&GroupPoint { x: x.clone(), t }, &z0), "t = {t}");
            t -= 0.37;
        }
    }

    #[test]
    fn residual_of_heat_quadratic_is_zero() {
        let m = rot();
        let u = |x: &[f64], t: f64| x[0] * x[0] + x[1] * x[1] + 4.0 * t;
        assert!(m.kolmogorov_residual(u, &[0.3, 1.1], 0.2, 1e-3).abs() < 1e-6);
    }
}
