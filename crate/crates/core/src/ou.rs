//! The Ornstein–Uhlenbeck process `dX = BX dt + √Q dW` with general drift:
//! Gramian, Kalman and (HR) conditions, the recurrence integral test, exact
//! Gaussian sampling and the Monte Carlo hitting / occupation estimators.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::DriftModel;
use crate::linalg;
use crate::par::{self, Execution};
use crate::quadrature::{self, BallRule};
use crate::stats;

/// Relative accuracy of the Gramian quadrature.
pub const GRAMIAN_TOL: f64 = 1e-10;
/// Tolerance on eigenvalue real parts and rank tests in (HR).
pub const HR_TOL: f64 = 1e-10;
/// Eigenvalues closer than this are treated as one eigenvalue.
const CLUSTER_TOL: f64 = 1e-6;
/// Eigenvalue floor of the fallback square root of `Q_h`.
pub const SQRT_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct OUModel {
    pub drift: DriftModel,
    kalman: bool,
}

impl OUModel {
    pub fn new(drift: DriftModel) -> Self {
        let kalman = kalman_rank(&drift);
        Self { drift, kalman }
    }

    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    pub fn kalman(&self) -> bool {
        self.kalman
    }

    fn require_kalman(&self) -> Result<()> {
        if self.kalman {
            Ok(())
        } else {
            Err(Error::KalmanViolation("rank[Q, BQ, ..., B^(N-1)Q] < N".into()))
        }
    }

    /// `Q_t = ∫₀ᵗ e^{sB} Q e^{sBᵀ} ds`.
    pub fn gramian(&self, t: f64) -> Result<DMatrix<f64>> {
        Ok(self.gramian_grid(&[t])?.pop().expect("one time"))
    }

    /// Gramians on an ascending time grid, accumulated piece by piece.
    ///
    /// `[0, t]` is cut into pieces of length `h ≤ 1/max(‖B‖₁, 1)`; the piece
    /// integral `Q_h` is computed once by adaptive Simpson and transported by
    /// `∫_{kh}^{(k+1)h} = e^{khB} Q_h e^{khBᵀ}`. Entries become non-finite when
    /// `e^{tB}` overflows.
    pub fn gramian_grid(&self, ts: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        if ts.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
            return Err(Error::InvalidInput("gramian needs finite t > 0".into()));
        }
        if ts.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidInput("gramian grid must be ascending".into()));
        }
        let b = self.drift.drift();
        let q = self.drift.diffusion();
        let h = 1.0 / linalg::norm_one(b).max(1.0);
        let q_h = simpson_gramian(b, q, h);
        let n = self.dim();
        let mut acc = DMatrix::<f64>::zeros(n, n);
        let mut k = 0u64;
        let mut out = Vec::with_capacity(ts.len());
        for &t in ts {
            let whole = (t / h).floor() as u64;
            while k < whole {
                let e = self.drift.flow(k as f64 * h);
                acc += &e * &q_h * e.transpose();
                k += 1;
            }
            let rest = t - whole as f64 * h;
            let mut qt = acc.clone();
            if rest > 0.0 {
                let e = self.drift.flow(whole as f64 * h);
                qt += &e * simpson_gramian(b, q, rest) * e.transpose();
            }
            out.push((&qt + qt.transpose()) * 0.5);
        }
        Ok(out)
    }

    /// Gaussian law of `X_t` started at `x`: mean map `e^{tB}` and covariance `Q_t`.
    pub fn transition(&self, t: f64) -> Result<Transition> {
        self.require_kalman()?;
        let cov = self.gramian(t)?;
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Singular(format!("Q_t is not positive definite at t = {t}")))?;
        let n = self.dim() as f64;
        let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(Transition {
            t,
            mean_map: self.drift.flow(t),
            log_norm: -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + log_det),
            chol: chol.l(),
            cov,
        })
    }
}

/// `∫₀ʰ e^{sB} Q e^{sBᵀ} ds` by adaptive Simpson in the max norm.
fn simpson_gramian(b: &DMatrix<f64>, q: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let f = |s: f64| {
        let e = linalg::expm(&(b * s)).expect("finite drift");
        &e * q * e.transpose()
    };
    let fa = f(0.0);
    let fm = f(0.5 * h);
    let fb = f(h);
    let whole = (&fa + &fm * 4.0 + &fb) * (h / 6.0);
    let scale = linalg::max_abs(&whole).max(f64::MIN_POSITIVE);
    simpson_step(&f, 0.0, h, fa, fm, fb, whole, GRAMIAN_TOL * 0.1 * scale, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> DMatrix<f64>>(
    f: &F,
    a: f64,
    b: f64,
    fa: DMatrix<f64>,
    fm: DMatrix<f64>,
    fb: DMatrix<f64>,
    whole: DMatrix<f64>,
    tol: f64,
    depth: u32,
) -> DMatrix<f64> {
    let m = 0.5 * (a + b);
    let flm = f(0.5 * (a + m));
    let frm = f(0.5 * (m + b));
    let left = (&fa + &flm * 4.0 + &fm) * ((m - a) / 6.0);
    let right = (&fm + &frm * 4.0 + &fb) * ((b - m) / 6.0);
    let both = &left + &right;
    let err = linalg::max_abs(&(&both - &whole));
    if depth == 0 || err <= 15.0 * tol {
        return &both + (&both - &whole) / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm.clone(), left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// `N(e^{tB}x, Q_t)` for a fixed `t`.
#[derive(Debug, Clone)]
pub struct Transition {
    pub t: f64,
    pub mean_map: DMatrix<f64>,
    pub cov: DMatrix<f64>,
    chol: DMatrix<f64>,
    log_norm: f64,
}

impl Transition {
    pub fn mean(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.mean_map * x
    }

    /// `p_t(x, y)`.
    pub fn density(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let diff = &self.mean_map * x - y;
        let w = self
            .chol
            .solve_lower_triangular(&diff)
            .expect("positive definite factor");
        (self.log_norm - 0.5 * w.norm_squared()).exp()
    }
}

/// `p_t(x, y) = exp(−|Q_t^{−1/2}(e^{tB}x − y)|²/2) / √((2π)^N det Q_t)`.
pub fn transition_density(model: &OUModel, t: f64, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    Ok(model.transition(t)?.density(x, y))
}

/// Kalman rank condition `rank[Q, BQ, …, B^{N−1}Q] = N`.
pub fn kalman_rank(model: &DriftModel) -> bool {
    let n = model.dim();
    let b = model.drift();
    let mut block = DMatrix::<f64>::zeros(n, n * n);
    let mut power = model.diffusion().clone();
    for k in 0..n {
        block.view_mut((0, k * n), (n, n)).copy_from(&power);
        power = b * power;
    }
    linalg::numerical_rank(&block, n as f64 * 1e-12) == n
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HrClassification {
    pub satisfied: bool,
    /// Critical eigenvalues on the imaginary axis that fail semisimplicity.
    pub borderline: bool,
    /// Eigenvalues with real part `≥ −1e−10`, as `(re, im)`.
    pub critical: Vec<(f64, f64)>,
    pub stable_dim: usize,
}

/// Condition (HR): the non-stable spectrum is empty, a simple `0`, or one
/// semisimple pair `±iα` (`α = 0` allowed, counted once).
pub fn hr_classify(b: &DMatrix<f64>) -> HrClassification {
    let n = b.nrows();
    let eig = b.complex_eigenvalues();
    let mut critical: Vec<(f64, f64)> = eig
        .iter()
        .filter(|l| l.re >= -HR_TOL)
        .map(|l| (l.re, l.im))
        .collect();
    critical.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    let stable_dim = n - critical.len();
    let on_axis = critical.iter().all(|l| l.0.abs() <= HR_TOL);

    // cluster (λ, multiplicity)
    let mut clusters: Vec<((f64, f64), usize)> = Vec::new();
    for &l in &critical {
        match clusters
            .iter_mut()
            .find(|(c, _)| (c.0 - l.0).hypot(c.1 - l.1) <= CLUSTER_TOL)
        {
            Some((_, m)) => *m += 1,
            None => clusters.push((l, 1)),
        }
    }
    let semisimple = clusters
        .iter()
        .all(|&((re, im), m)| complex_rank_shifted(b, re, im) == n - m);
    let shape_ok = match critical.len() {
        0 => true,
        1 => critical[0].1.abs() <= CLUSTER_TOL,
        2 => {
            let (a, c) = (critical[0], critical[1]);
            (a.1 + c.1).abs() <= CLUSTER_TOL
        }
        _ => false,
    };
    HrClassification {
        satisfied: on_axis && semisimple && shape_ok,
        borderline: on_axis && !semisimple,
        critical,
        stable_dim,
    }
}

/// Rank of `B − λI` over ℂ via its real `2N×2N` representation.
fn complex_rank_shifted(b: &DMatrix<f64>, re: f64, im: f64) -> usize {
    let n = b.nrows();
    let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
    let shifted = b - DMatrix::identity(n, n) * re;
    let imag = DMatrix::<f64>::identity(n, n) * -im;
    m.view_mut((0, 0), (n, n)).copy_from(&shifted);
    m.view_mut((n, n), (n, n)).copy_from(&shifted);
    m.view_mut((0, n), (n, n)).copy_from(&(-&imag));
    m.view_mut((n, 0), (n, n)).copy_from(&imag);
    let cut = HR_TOL * linalg::norm_one(b).max(1.0);
    let sv = m.singular_values();
    sv.iter().filter(|&&s| s > cut).count() / 2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegralOutcome {
    Divergent,
    Convergent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralTest {
    pub outcome: IntegralOutcome,
    /// `a` in `log det Q_t ≈ a log t + b`
    pub exponent: f64,
    pub exponent_se: f64,
    /// `c` in `log det Q_t ≈ c t + d`
    pub rate: f64,
    pub aic_polynomial: f64,
    pub aic_exponential: f64,
    pub exponential_wins: bool,
    /// Grid times used and `log det Q_t` there.
    pub times: Vec<f64>,
    pub log_det: Vec<f64>,
    /// `e^{tB}` overflowed before `t_max`.
    pub overflow: bool,
}

pub const INTEGRAL_T_MAX: f64 = 1e4;
pub const INTEGRAL_POINTS: usize = 48;
/// Half-width of the inconclusive band above `a = 2`.
const EXPONENT_GAP: f64 = 0.1;
/// Growth rates below this are indistinguishable from a constant.
const MIN_RATE: f64 = 1e-3;

/// Decides `∫₁^∞ det(Q_t)^{−1/2} dt = ∞` from the growth of `det Q_t` on a
/// log-spaced grid of `[1, t_max]`.
pub fn integral_test(model: &OUModel, t_max: f64, n_points: usize) -> Result<IntegralTest> {
    model.require_kalman()?;
    if !(t_max > 1.0) || n_points < 4 {
        return Err(Error::InvalidInput("integral test needs t_max > 1 and at least 4 points".into()));
    }
    let grid: Vec<f64> = (0..n_points)
        .map(|i| t_max.powf(i as f64 / (n_points - 1) as f64))
        .collect();
    let qs = model.gramian_grid(&grid)?;
    let mut times = Vec::new();
    let mut log_det = Vec::new();
    let mut overflow = false;
    for (t, q) in grid.iter().zip(&qs) {
        if q.iter().any(|v| !v.is_finite()) {
            overflow = true;
            break;
        }
        let ld = match q.clone().cholesky() {
            Some(c) => 2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>(),
            None => {
                let det = q.determinant();
                if !(det > 0.0) {
                    return Err(Error::KalmanViolation(format!("det Q_t = {det} at t = {t}")));
                }
                det.ln()
            }
        };
        if !ld.is_finite() {
            overflow = true;
            break;
        }
        times.push(*t);
        log_det.push(ld);
    }
    if times.len() < 4 {
        return Ok(IntegralTest {
            outcome: IntegralOutcome::Convergent,
            exponent: f64::INFINITY,
            exponent_se: f64::NAN,
            rate: f64::INFINITY,
            aic_polynomial: f64::NAN,
            aic_exponential: f64::NAN,
            exponential_wins: true,
            times,
            log_det,
            overflow,
        });
    }
    let n = times.len() as f64;
    let log_t: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let (a, _, rss_poly) = stats::linear_fit(&log_t, &log_det);
    let (c, _, rss_exp) = stats::linear_fit(&times, &log_det);
    let aic = |rss: f64| n * (rss / n).max(1e-30).ln() + 4.0;
    let (aic_polynomial, aic_exponential) = (aic(rss_poly), aic(rss_exp));
    let sxx: f64 = {
        let m = stats::mean(&log_t);
        log_t.iter().map(|v| (v - m) * (v - m)).sum()
    };
    let exponent_se = ((rss_poly / (n - 2.0)).max(0.0) / sxx).sqrt();
    let exponential_wins = overflow || (aic_exponential < aic_polynomial && c > MIN_RATE);
    let outcome = if exponential_wins {
        IntegralOutcome::Convergent
    } else if a <= 2.0 + 1e-6 {
        IntegralOutcome::Divergent
    } else if a <= 2.0 + EXPONENT_GAP {
        IntegralOutcome::Inconclusive
    } else {
        IntegralOutcome::Convergent
    };
    Ok(IntegralTest {
        outcome,
        exponent: a,
        exponent_se,
        rate: c,
        aic_polynomial,
        aic_exponential,
        exponential_wins,
        times,
        log_det,
        overflow,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Recurrent,
    Transient,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecurrenceVerdict {
    pub kalman_ok: bool,
    pub hr: bool,
    pub hr_detail: HrClassification,
    pub integral_test: Option<IntegralOutcome>,
    pub verdict: Verdict,
    pub evidence: Option<IntegralTest>,
}

/// Combines (HR) and the integral test; disagreement yields `Unknown`.
pub fn recurrence_verdict(model: &OUModel) -> Result<RecurrenceVerdict> {
    let hr_detail = hr_classify(model.drift.drift());
    let hr = hr_detail.satisfied;
    let evidence = if model.kalman() {
        Some(integral_test(model, INTEGRAL_T_MAX, INTEGRAL_POINTS)?)
    } else {
        None
    };
    let outcome = evidence.as_ref().map(|e| e.outcome);
    let verdict = match (hr, outcome) {
        (true, Some(IntegralOutcome::Divergent)) => Verdict::Recurrent,
        (false, Some(IntegralOutcome::Convergent)) => Verdict::Transient,
        _ => Verdict::Unknown,
    };
    Ok(RecurrenceVerdict { kalman_ok: model.kalman(), hr, hr_detail, integral_test: outcome, verdict, evidence })
}

// ---------------------------------------------------------------------------
// Exact sampling

/// Exact one-step transition `x ↦ e^{hB}x + √Q_h g` in flat row-major form.
#[derive(Debug, Clone)]
struct Step {
    n: usize,
    m: Vec<f64>,
    l: Vec<f64>,
}

impl Step {
    fn new(model: &OUModel, h: f64) -> Result<Self> {
        let e = model.drift.flow(h);
        let q = model.gramian(h)?;
        let l = linalg::psd_sqrt(&q, SQRT_FLOOR);
        let n = model.dim();
        let flat = |a: &DMatrix<f64>| (0..n * n).map(|k| a[(k / n, k % n)]).collect();
        Ok(Self { n, m: flat(&e), l: flat(&l) })
    }

    #[inline]
    fn apply<R: Rng + ?Sized>(&self, x: &mut [f64], g: &mut [f64], tmp: &mut [f64], rng: &mut R) {
        let n = self.n;
        for v in g.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for i in 0..n {
            let row = &self.m[i * n..(i + 1) * n];
            let lrow = &self.l[i * n..(i + 1) * n];
            let mut s = 0.0;
            for j in 0..n {
                s += row[j] * x[j] + lrow[j] * g[j];
            }
            tmp[i] = s;
        }
        x.copy_from_slice(tmp);
    }
}

/// Exact-in-law path on an ascending grid starting at `0`.
pub fn sample_path(model: &OUModel, x0: &DVector<f64>, t_grid: &[f64], seed: u64) -> Result<Vec<DVector<f64>>> {
    if x0.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: x0.len() });
    }
    if t_grid.first() != Some(&0.0) || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("time grid must start at 0 and increase strictly".into()));
    }
    let mut steps: HashMap<u64, Step> = HashMap::new();
    let mut rng = par::stream_rng(seed, 0);
    let n = model.dim();
    let mut x: Vec<f64> = x0.iter().cloned().collect();
    let (mut g, mut tmp) = (vec![0.0; n], vec![0.0; n]);
    let mut out = vec![x0.clone()];
    for w in t_grid.windows(2) {
        let h = w[1] - w[0];
        let step = match steps.entry(h.to_bits()) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(e) => e.insert(Step::new(model, h)?),
        };
        step.apply(&mut x, &mut g, &mut tmp, &mut rng);
        out.push(DVector::from_column_slice(&x));
    }
    Ok(out)
}

/// `n_paths` independent draws of `X_t` from `x0`, one stream per draw.
pub fn sample_marginal(
    model: &OUModel,
    x0: &DVector<f64>,
    t: f64,
    n_paths: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<DVector<f64>>> {
    let step = Step::new(model, t)?;
    let n = model.dim();
    Ok(par::map_indexed(exec, n_paths, |i| {
        let mut rng = par::stream_rng(seed, i as u64);
        let mut x: Vec<f64> = x0.iter().cloned().collect();
        let (mut g, mut tmp) = (vec![0.0; n], vec![0.0; n]);
        step.apply(&mut x, &mut g, &mut tmp, &mut rng);
        DVector::from_vec(x)
    }))
}

// ---------------------------------------------------------------------------
// Hitting and occupation

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidInput(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    /// Distance from `x` to the centre minus the radius (negative inside).
    fn gap(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            - self.radius
    }
}

/// Monte Carlo plan for the path estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathPlan {
    pub n_paths: usize,
    pub step: f64,
    pub horizon: f64,
    pub seed: u64,
    pub execution: Execution,
}

/// Standard deviations of the Gaussian increment treated as an impassable margin.
const SKIP_MARGIN: f64 = 8.0;

/// Transitions of `2^j · step`. Far from the target a path takes the longest
/// one whose reach cannot meet the ball, so it still lands on the `step` grid
/// and the skipped grid points lie outside the ball.
struct Ladder {
    steps: Vec<Step>,
    /// `SKIP_MARGIN · √tr Q_h`
    reach: Vec<f64>,
    /// bound on `‖e^{sB} − I‖` for `s ≤ h`
    drift_dev: Vec<f64>,
}

impl Ladder {
    fn new(model: &OUModel, step: f64, horizon: f64) -> Result<Self> {
        let b_norm = model.drift.drift().norm();
        let mut steps = Vec::new();
        let mut reach = Vec::new();
        let mut drift_dev = Vec::new();
        let mut h = step;
        loop {
            steps.push(Step::new(model, h)?);
            reach.push(SKIP_MARGIN * model.gramian(h)?.trace().max(0.0).sqrt());
            drift_dev.push((h * b_norm).exp_m1());
            if 2.0 * h > horizon || steps.len() >= 40 {
                break;
            }
            h *= 2.0;
        }
        Ok(Self { steps, reach, drift_dev })
    }

    #[inline]
    fn level(&self, gap: f64, x_norm: f64) -> usize {
        let mut j = 0;
        while j + 1 < self.steps.len() && gap - self.drift_dev[j + 1] * x_norm >= self.reach[j + 1] {
            j += 1;
        }
        j
    }
}

/// Outcome of one path on the `step` grid.
struct PathRecord {
    /// First grid index inside the ball.
    first_hit: Option<u64>,
    /// Grid points `1..=n` inside the ball.
    occupation: u64,
    /// Smallest gap seen (for near-miss accounting).
    min_gap: f64,
}

fn run_path(
    ladder: &Ladder,
    ball: &Ball,
    x0: &[f64],
    n_grid: u64,
    rng: &mut impl Rng,
    stop_on_hit: bool,
) -> PathRecord {
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut g, mut tmp) = (vec![0.0; n], vec![0.0; n]);
    let mut gap = ball.gap(&x);
    let mut rec = PathRecord { first_hit: (gap < 0.0).then_some(0), occupation: 0, min_gap: gap };
    if stop_on_hit && rec.first_hit.is_some() {
        return rec;
    }
    let mut k = 0u64;
    while k < n_grid {
        let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let j = ladder.level(gap, x_norm);
        ladder.steps[j].apply(&mut x, &mut g, &mut tmp, rng);
        k += 1 << j;
        gap = ball.gap(&x);
        rec.min_gap = rec.min_gap.min(gap);
        if gap < 0.0 && k <= n_grid {
            rec.occupation += 1;
            if rec.first_hit.is_none() {
                rec.first_hit = Some(k);
                if stop_on_hit {
                    break;
                }
            }
        }
    }
    rec
}

fn grid_len(plan: &PathPlan) -> u64 {
    (plan.horizon / plan.step + 1e-9).floor() as u64
}

fn validate(model: &OUModel, x: &[f64], ball: &Ball, plan: &PathPlan) -> Result<()> {
    if x.len() != model.dim() || ball.center.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: x.len().min(ball.center.len()) });
    }
    if !(plan.step > 0.0) || !(plan.horizon >= plan.step) || plan.n_paths == 0 {
        return Err(Error::InvalidInput("need step > 0, horizon ≥ step and n_paths > 0".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingEstimate {
    pub x: Vec<f64>,
    pub target: Ball,
    pub horizon: f64,
    pub n_paths: usize,
    pub hits: usize,
    pub p_hat: f64,
    pub ci95: (f64, f64),
    pub step: f64,
    /// Paths that never landed in the ball but came within `√step` of it:
    /// candidates for crossings missed by discrete monitoring, which bias
    /// `p_hat` downward.
    pub near_misses: usize,
}

/// Hitting probabilities for several horizons from one set of paths, so the
/// estimates are nondecreasing in the horizon.
pub fn hitting_sweep(model: &OUModel, x: &[f64], ball: &Ball, horizons: &[f64], plan: &PathPlan) -> Result<Vec<HittingEstimate>> {
    let h_max = horizons.iter().cloned().fold(plan.horizon, f64::max);
    let plan_max = PathPlan { horizon: h_max, ..*plan };
    validate(model, x, ball, &plan_max)?;
    model.require_kalman()?;
    let ladder = Ladder::new(model, plan.step, h_max)?;
    let n_grid = grid_len(&plan_max);
    let records: Vec<(Option<u64>, f64)> = par::map_indexed(plan.execution, plan.n_paths, |i| {
        let mut rng = par::stream_rng(plan.seed, i as u64);
        let r = run_path(&ladder, ball, x, n_grid, &mut rng, true);
        (r.first_hit, r.min_gap)
    });
    let near = plan.step.sqrt();
    Ok(horizons
        .iter()
        .map(|&h| {
            let n_h = (h / plan.step + 1e-9).floor() as u64;
            let hits = records.iter().filter(|r| r.0.is_some_and(|k| k <= n_h)).count();
            let near_misses = records.iter().filter(|r| r.0.is_none() && r.1 < near).count();
            HittingEstimate {
                x: x.to_vec(),
                target: ball.clone(),
                horizon: h,
                n_paths: plan.n_paths,
                hits,
                p_hat: hits as f64 / plan.n_paths as f64,
                ci95: stats::wilson_interval(hits, plan.n_paths),
                step: plan.step,
                near_misses,
            }
        })
        .collect())
}

/// Fraction of exact-transition paths on the `step` grid that enter `ball`
/// by `plan.horizon`.
pub fn hitting_probability(model: &OUModel, x: &[f64], ball: &Ball, plan: &PathPlan) -> Result<HittingEstimate> {
    Ok(hitting_sweep(model, x, ball, &[plan.horizon], plan)?.remove(0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupationEstimate {
    pub horizon: f64,
    pub n_paths: usize,
    /// Mean of `step · #{grid points in the ball}`.
    pub mean: f64,
    pub std_error: f64,
    /// `∫₀^T P_t 1_A(x) dt` by quadrature of the transition density.
    pub analytic: Option<f64>,
}

/// Expected time spent in `ball` up to the horizon.
pub fn occupation_time(model: &OUModel, x: &[f64], ball: &Ball, plan: &PathPlan, with_analytic: bool) -> Result<OccupationEstimate> {
    validate(model, x, ball, plan)?;
    model.require_kalman()?;
    let ladder = Ladder::new(model, plan.step, plan.horizon)?;
    let n_grid = grid_len(plan);
    let times: Vec<f64> = par::map_indexed(plan.execution, plan.n_paths, |i| {
        let mut rng = par::stream_rng(plan.seed, i as u64);
        run_path(&ladder, ball, x, n_grid, &mut rng, false).occupation as f64 * plan.step
    });
    let mean = stats::mean(&times);
    let std_error = if times.len() > 1 { (stats::variance(&times) / times.len() as f64).sqrt() } else { f64::NAN };
    let analytic = if with_analytic {
        Some(truncated_potential(model, x, ball, plan.horizon)?)
    } else {
        None
    };
    Ok(OccupationEstimate { horizon: plan.horizon, n_paths: plan.n_paths, mean, std_error, analytic })
}

/// `∫₀^T ∫_ball p_t(x, y) dy dt`: Gauss–Legendre in `t` on geometric pieces,
/// product ball rule in `y`.
pub fn truncated_potential(model: &OUModel, x: &[f64], ball: &Ball, horizon: f64) -> Result<f64> {
    let n = model.dim();
    let rule = BallRule::product(n, 24)?;
    let xv = DVector::from_column_slice(x);
    let center = DVector::from_column_slice(&ball.center);
    let nodes: Vec<DVector<f64>> = (0..rule.len())
        .map(|k| &center + DVector::from_column_slice(&rule.directions[k]) * (rule.radii[k] * ball.radius))
        .collect();
    let jac = ball.radius.powi(n as i32);
    let mass = |t: f64| -> Result<f64> {
        let tr = model.transition(t)?;
        Ok(jac * nodes.iter().zip(&rule.weights).map(|(y, w)| w * tr.density(&xv, y)).sum::<f64>())
    };
    // pieces: [0, t1], then geometric up to the horizon
    let t1 = (1e-3f64).min(horizon);
    let mut edges = vec![0.0, t1];
    while *edges.last().expect("nonempty") < horizon {
        let next = (edges.last().expect("nonempty") * 1.25).min(horizon);
        edges.push(next);
    }
    let (gx, gw) = quadrature::gauss_legendre(8);
    let mut total = 0.0;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        for (u, wt) in gx.iter().zip(&gw) {
            let t = 0.5 * (a + b) + 0.5 * (b - a) * u;
            total += 0.5 * (b - a) * wt * mass(t)?;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcessivityRow {
    pub x: Vec<f64>,
    pub r: f64,
    pub phi: f64,
    pub phi_se: f64,
    pub pr_phi: f64,
    pub pr_phi_se: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcessivityReport {
    pub rows: Vec<ExcessivityRow>,
    /// `P_rφ(x)` nondecreasing as `r ↓ 0` within `3σ`, for every `x`.
    pub monotone: bool,
    pub pass: bool,
}

/// Checks `P_rφ ≤ φ` for `φ(x) = P(hit ball by the horizon)`.
///
/// `P_rφ(x) = E φ(X_r)` is estimated with fresh streams by drawing `X_r` exactly
/// and running one hitting path from it.
pub fn excessivity_check(model: &OUModel, ball: &Ball, xs: &[Vec<f64>], r_list: &[f64], plan: &PathPlan) -> Result<ExcessivityReport> {
    let mut rows = Vec::new();
    let mut monotone = true;
    let mut r_sorted = r_list.to_vec();
    r_sorted.sort_by(|a, b| b.total_cmp(a));
    let ladder = Ladder::new(model, plan.step, plan.horizon)?;
    let n_grid = grid_len(plan);
    let se = |p: f64, n: usize| (p * (1.0 - p) / n as f64).sqrt().max(0.5 / n as f64);
    for (xi, x) in xs.iter().enumerate() {
        validate(model, x, ball, plan)?;
        let phi_est = hitting_probability(model, x, ball, plan)?;
        let phi = phi_est.p_hat;
        let phi_se = se(phi, plan.n_paths);
        let mut prev: Option<(f64, f64)> = None;
        for (ri, &r) in r_sorted.iter().enumerate() {
            let first = Step::new(model, r)?;
            let stream_base = ((xi * r_sorted.len() + ri + 1) as u64) << 32;
            let hits: usize = par::map_indexed(plan.execution, plan.n_paths, |i| {
                let mut rng = par::stream_rng(plan.seed, stream_base + i as u64);
                let n = x.len();
                let mut y = x.clone();
                let (mut g, mut tmp) = (vec![0.0; n], vec![0.0; n]);
                first.apply(&mut y, &mut g, &mut tmp, &mut rng);
                run_path(&ladder, ball, &y, n_grid, &mut rng, true).first_hit.is_some() as usize
            })
            .into_iter()
            .sum();
            let pr_phi = hits as f64 / plan.n_paths as f64;
            let pr_phi_se = se(pr_phi, plan.n_paths);
            let sigma = (phi_se * phi_se + pr_phi_se * pr_phi_se).sqrt();
            if let Some((p, s)) = prev {
                // smaller r must not be clearly below larger r
                if pr_phi + 3.0 * (s * s + pr_phi_se * pr_phi_se).sqrt() < p {
                    monotone = false;
                }
            }
            prev = Some((pr_phi, pr_phi_se));
            rows.push(ExcessivityRow {
                x: x.clone(),
                r,
                phi,
                phi_se,
                pr_phi,
                pr_phi_se,
                pass: pr_phi <= phi + 3.0 * sigma,
            });
        }
    }
    let pass = monotone && rows.iter().all(|r| r.pass);
    Ok(ExcessivityReport { rows, monotone, pass })
}
