//! Gauss–Legendre rules, product rules on the unit ball, and ball sampling.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        x.iter().map(|&t| mid + half * t).collect(),
        w.iter().map(|&v| half * v).collect(),
    )
}

/// A product quadrature rule on the unit ball of `R^dim`.
///
/// Each node is stored as its radius fraction, unit direction and weight, so
/// callers can scale the rule to any ball and evaluate radial kernels without
/// recomputing norms.
#[derive(Debug, Clone)]
pub struct BallRule {
    pub dim: usize,
    pub radii: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl BallRule {
    /// Polar (`dim = 2`) or spherical (`dim = 3`) product rule with `m` nodes
    /// per axis: Gauss–Legendre in the radius, uniform angles, and
    /// Gauss–Legendre in the polar cosine.
    pub fn product(dim: usize, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("ball rule needs at least one node per axis".into()));
        }
        let (rad, rw) = gauss_legendre_on(m, 0.0, 1.0);
        let mut rule = BallRule { dim, radii: vec![], directions: vec![], weights: vec![] };
        let mut push = |r: f64, dir: Vec<f64>, w: f64| {
            rule.radii.push(r);
            rule.directions.push(dir);
            rule.weights.push(w);
        };
        match dim {
            1 => {
                for (&r, &w) in rad.iter().zip(&rw) {
                    push(r, vec![1.0], w);
                    push(r, vec![-1.0], w);
                }
            }
            2 => {
                let dtheta = 2.0 * PI / m as f64;
                for (&r, &w) in rad.iter().zip(&rw) {
                    for j in 0..m {
                        let th = dtheta * (j as f64 + 0.5);
                        push(r, vec![th.cos(), th.sin()], w * r * dtheta);
                    }
                }
            }
            3 => {
                let (mu, muw) = gauss_legendre(m);
                let dphi = 2.0 * PI / m as f64;
                for (&r, &w) in rad.iter().zip(&rw) {
                    for (&c, &cw) in mu.iter().zip(&muw) {
                        let s = (1.0 - c * c).sqrt();
                        for k in 0..m {
                            let ph = dphi * (k as f64 + 0.5);
                            push(r, vec![s * ph.cos(), s * ph.sin(), c], w * r * r * cw * dphi);
                        }
                    }
                }
            }
            _ => {
                return Err(Error::InvalidInput(format!(
                    "tensor-grid ball rules exist for dimensions 1..=3, got {dim}"
                )))
            }
        }
        Ok(rule)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Volume of the unit ball in `R^dim` (`π^{d/2} / Γ(d/2 + 1)`).
pub fn unit_ball_volume(dim: usize) -> f64 {
    let h = dim as f64 / 2.0;
    PI.powf(h) / statrs::function::gamma::gamma(h + 1.0)
}

/// Uniform random direction on the unit sphere of `R^dim`.
pub fn random_direction<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-300 {
            return v.into_iter().map(|a| a / n).collect();
        }
    }
}

/// Uniform point in the unit ball, returned as `(radius fraction, direction)`.
pub fn random_in_unit_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> (f64, Vec<f64>) {
    let dir = random_direction(rng, dim);
    let u: f64 = rng.random();
    (u.powf(1.0 / dim as f64), dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1, 2, 5, 16, 64] {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg} q={q}");
            }
        }
    }

    #[test]
    fn ball_rules_recover_volume_and_second_moment() {
        for dim in 1..=3 {
            let rule = BallRule::product(dim, 12).unwrap();
            let vol: f64 = rule.weights.iter().sum();
            assert_relative_eq!(vol, unit_ball_volume(dim), max_relative = 1e-13);
            // ∫_B |x|² = d·ω_d/(d+2)
            let m2: f64 = rule.weights.iter().zip(&rule.radii).map(|(w, r)| w * r * r).sum();
            let exact = dim as f64 * unit_ball_volume(dim) / (dim as f64 + 2.0);
            assert_relative_eq!(m2, exact, max_relative = 1e-13);
        }
    }

    #[test]
    fn ball_rule_rejects_high_dimension() {
        assert!(BallRule::product(4, 4).is_err());
        assert!(BallRule::product(2, 0).is_err());
    }

    #[test]
    fn unit_ball_volumes() {
        assert_relative_eq!(unit_ball_volume(1), 2.0, max_relative = 1e-14);
        assert_relative_eq!(unit_ball_volume(2), PI, max_relative = 1e-14);
        assert_relative_eq!(unit_ball_volume(3), 4.0 * PI / 3.0, max_relative = 1e-14);
        assert_relative_eq!(unit_ball_volume(5), 8.0 * PI * PI / 15.0, max_relative = 1e-14);
    }
}
