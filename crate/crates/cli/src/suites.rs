//! The six verification suites.

use std::f64::consts::E;

use nalgebra::DVector;
use oukl_core::harnack::{self, FamilyKind, FamilyMember, KernelSampling};
use oukl_core::ou::{self, Ball, OUModel, PathPlan, Verdict};
use oukl_core::par::stream_rng;
use oukl_core::{mvf, onion, DriftModel, Error, GroupPoint, OnionSpec, QuadratureConfig};
use rand::Rng;
use serde_json::json;

use crate::config::{Expectation, RunConfig};
use crate::report::{Record, Report, Table};
use crate::{CliError, Outcome};

pub mod anchor {
    pub const NORMALIZATION: &str = "mean-value formula: unit weight integral";
    pub const MEAN_VALUE: &str = "mean-value formula on onions";
    pub const INCLUSION: &str = "two-onion inclusion lemma";
    pub const KERNEL_SCALING: &str = "kernel bounds: parabolic scaling";
    pub const HARNACK: &str = "global Harnack inequality";
    pub const HARNACK_SHARP: &str = "Harnack inequality: exponential solutions";
    pub const LIOUVILLE: &str = "Liouville theorem at t = -inf";
    pub const KALMAN: &str = "Kalman rank condition";
    pub const HR: &str = "condition (HR) versus integral test";
    pub const GRAMIAN: &str = "controllability Gramian: det Q_t = t^N";
    pub const VERDICT: &str = "recurrence criterion";
    pub const TRANSITION: &str = "exact Gaussian transition";
    pub const HITTING: &str = "hitting probabilities";
    pub const OCCUPATION: &str = "expected occupation time";
    pub const EXCESSIVE: &str = "hitting probabilities are excessive";
}

fn family_name(kind: FamilyKind) -> &'static str {
    match kind {
        FamilyKind::Constant => "constant",
        FamilyKind::Quadratic => "quadratic",
        FamilyKind::Exponential => "exponential",
        FamilyKind::Gaussian => "gaussian",
        FamilyKind::Rotating => "rotating",
    }
}

fn details<T: serde::Serialize>(value: &T) -> Result<serde_json::Value, CliError> {
    serde_json::to_value(value).map_err(|e| CliError::Internal(e.to_string()))
}

/// `|mean value − u(z0)|` on `pairs` random `(z0, r)` for each member of `kind`.
///
/// `r = 10^U(−1,1)`, `x ∈ U(−1,1)^N`; `t ∈ U(−1,1)` for global members and
/// `U(−1/2,1/2)` for half-space ones. Returns `None` if `B` has a trivial kernel
/// and the family is exponential.
pub fn exactness_records(
    model: &DriftModel,
    kind: FamilyKind,
    pairs: usize,
    p: u32,
    cfg: &QuadratureConfig,
    tolerance: f64,
    seed: u64,
) -> Result<Option<Vec<Record>>, CliError> {
    let family = match harnack::test_family(model, kind) {
        Ok(f) => f,
        Err(Error::TrivialKernel) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let mut rng = stream_rng(seed, kind as u64);
    let mut records = Vec::with_capacity(pairs);
    for i in 0..pairs {
        let mem = &family.members[i % family.members.len()];
        let r = 10f64.powf(rng.random_range(-1.0..1.0));
        let x: Vec<f64> = (0..model.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t = if mem.global { rng.random_range(-1.0..1.0) } else { rng.random_range(-0.5..0.5) };
        let spec = OnionSpec::new(GroupPoint::new(x.clone(), t), r, p, model.clone())?;
        let mv = mvf::mean_value(mem.field.as_ref(), &spec, cfg)?;
        let target = mem.field.eval(&x, t);
        let tol = (tolerance * mv.scale).max(mv.error);
        records.push(Record::at_most(
            format!("exactness/{}/{i}: {} at r = {r:.3e}", family_name(kind), mem.field.label()),
            anchor::MEAN_VALUE,
            (mv.value - target).abs(),
            tol,
        ));
    }
    Ok(Some(records))
}

pub fn cmd_mvf_check(config: &RunConfig) -> Result<Outcome, CliError> {
    let model = config.drift_model()?;
    let cfg = config.quadrature_config();
    let p = config.p;
    let n = model.dim();
    let mut records = Vec::new();
    let mut norms = Vec::new();
    let center: Vec<f64> = (0..n).map(|i| 0.25 * (i as f64 + 1.0)).collect();
    for &r in &config.r_grid {
        let spec = OnionSpec::new(GroupPoint::new(center.clone(), 0.5), r, p, model.clone())?;
        let rep = mvf::onion_volume_weight_check(&spec, &cfg)?;
        records.push(Record::at_most(format!("normalization r = {r:e}"), anchor::NORMALIZATION, rep.deviation, config.mvf.tolerance));
        norms.push(json!({"r": r, "report": details(&rep)?}));
    }
    let mut skipped = Vec::new();
    for (k, kind) in
        [FamilyKind::Constant, FamilyKind::Quadratic, FamilyKind::Exponential, FamilyKind::Gaussian, FamilyKind::Rotating]
            .into_iter()
            .enumerate()
    {
        let seed = config.seed().wrapping_add(k as u64);
        match exactness_records(&model, kind, config.mvf.pairs, p, &cfg, config.mvf.tolerance, seed)? {
            Some(recs) => records.extend(recs),
            None => skipped.push(family_name(kind)),
        }
    }
    let det = json!({"normalization": norms, "skipped_families": skipped});
    Ok(Outcome { report: Report::new(config, records, det), table: None })
}

pub fn cmd_onion_theta(config: &RunConfig) -> Result<Outcome, CliError> {
    let model = config.drift_model()?;
    let p = config.p;
    let theta = onion::analytic_constants(model.dim(), p);
    let sweep = onion::two_onion_sweep(&config.r_grid, &model, p, config.theta.sigma_points, config.seed(), config.execution);
    let (records, det) = match sweep {
        Ok(reports) => {
            let records = config
                .r_grid
                .iter()
                .map(|&r| {
                    let at_r: Vec<_> = reports.iter().filter(|rep| rep.r == r).collect();
                    let max = at_r.iter().map(|rep| rep.theta_empirical).fold(0.0, f64::max);
                    let mut rec = Record::at_most(format!("theta r = {r:e}"), anchor::INCLUSION, max, theta.theta);
                    rec.pass &= at_r.iter().all(|rep| rep.inclusion_verified);
                    rec
                })
                .collect();
            (records, json!({"analytic": details(&theta)?, "samples": details(&reports)?}))
        }
        Err(Error::LemmaViolation(msg)) => (
            vec![Record { name: "theta sweep".into(), anchor: anchor::INCLUSION.into(), value: f64::NAN, tolerance: theta.theta, pass: false }],
            json!({"analytic": details(&theta)?, "violation": msg}),
        ),
        Err(e) => return Err(e.into()),
    };
    Ok(Outcome { report: Report::new(config, records, det), table: None })
}

pub fn cmd_harnack(config: &RunConfig) -> Result<Outcome, CliError> {
    let model = config.drift_model()?;
    let p = config.p;
    let hs = &config.harnack;
    let plan = KernelSampling {
        sigma_points: hs.sigma_points,
        onion_points: hs.onion_points,
        seed: config.seed(),
        execution: config.execution,
    };
    let sweep = harnack::kernel_sweep(&config.r_grid, p, &model, &plan).map_err(|e| match e {
        Error::InvalidInput(m) => CliError::Config { field: "r_grid".into(), message: m },
        e => e.into(),
    })?;
    let mut records = Vec::new();
    for (name, slope) in [("slope lower", sweep.slope_lower), ("slope K1", sweep.slope_k1), ("slope K2", sweep.slope_k2)] {
        records.push(Record::at_most(name, anchor::KERNEL_SCALING, (slope - sweep.exponent).abs(), hs.slope_tolerance));
    }
    let constant = sweep.harnack_constant;
    records.push(Record::holds("constant finite", anchor::HARNACK, constant.is_finite() && constant > 0.0));
    let n = model.dim();
    let mut runs = Vec::new();
    let mut k = 0u64;
    for kind in [FamilyKind::Constant, FamilyKind::Exponential, FamilyKind::Rotating, FamilyKind::Gaussian] {
        let family = match harnack::test_family(&model, kind) {
            Ok(f) => f,
            Err(Error::TrivialKernel) => continue,
            Err(e) => return Err(e.into()),
        };
        for mem in family.members.iter().filter(|m| m.nonnegative) {
            let z0 = GroupPoint::origin(n);
            let seed = config.seed().wrapping_add(k);
            k += 1;
            let rep = harnack::harnack_verify(mem.field.as_ref(), &model, &z0, hs.samples, seed, constant, p)?;
            let scope = if rep.restricted_domain { " (restricted-domain evidence)" } else { "" };
            let label = format!("harnack/{}: {}{scope}", family_name(kind), rep.label);
            let mut rec = Record::at_most(label.clone(), anchor::HARNACK, rep.sup_ratio, constant);
            rec.pass = rep.pass;
            records.push(rec);
            if matches!(kind, FamilyKind::Exponential | FamilyKind::Rotating) {
                records.push(Record::at_most(format!("{label} sup = e"), anchor::HARNACK_SHARP, (rep.sup_ratio - E).abs(), 1e-3));
            }
            runs.push(rep);
        }
    }
    let det = json!({"sweep": details(&sweep)?, "runs": details(&runs)?});
    Ok(Outcome { report: Report::new(config, records, det), table: None })
}

/// Time below which a unit-`b` exponential stays `≤ ε` at `x`: exact for
/// `exp(⟨b, x⟩ + t)`, from `⟨E(t)b, x⟩ ≤ |x|` for the rotating kind.
pub fn predicted_threshold(kind: FamilyKind, member: &FamilyMember, x: &[f64], epsilon: f64) -> f64 {
    match kind {
        FamilyKind::Rotating => epsilon.ln() - x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        _ => epsilon.ln() - member.field.eval(x, 0.0).ln(),
    }
}

/// Default Liouville points: five spread-out positions.
pub fn default_liouville_points(n: usize) -> Vec<Vec<f64>> {
    (0..5).map(|i| (0..n).map(|j| (i as f64 - 2.0) * (1.0 - 0.3 * j as f64) + 0.5 * j as f64).collect()).collect()
}

pub fn cmd_liouville(config: &RunConfig) -> Result<Outcome, CliError> {
    let model = config.drift_model()?;
    let ls = &config.liouville;
    let mut members = Vec::new();
    for kind in [FamilyKind::Exponential, FamilyKind::Rotating] {
        match harnack::test_family(&model, kind) {
            Ok(f) => members.extend(f.members.into_iter().map(|m| (kind, m))),
            Err(Error::TrivialKernel) => {}
            Err(e) => return Err(e.into()),
        }
    }
    if !(ls.t_step > 0.0) || !(ls.t_min < 0.0) {
        return Err(CliError::Config { field: "liouville".into(), message: "need t_step > 0 and t_min < 0".into() });
    }
    let points = if ls.points.is_empty() { default_liouville_points(model.dim()) } else { ls.points.clone() };
    let steps = (-ls.t_min / ls.t_step).floor() as usize;
    let t_grid: Vec<f64> = (0..=steps).map(|k| if k == 0 { 0.0 } else { -(k as f64) * ls.t_step }).collect();
    let n = model.dim();
    let mut header = vec!["member".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend(["t", "u", "gap"].map(String::from));
    let mut table = Table { header, rows: Vec::new() };
    let mut records = Vec::new();
    let mut tables = Vec::new();
    for (mi, (kind, mem)) in members.iter().enumerate() {
        let infimum = mem.infimum.unwrap_or(0.0);
        let tab = harnack::liouville_limit_demo(mem.field.as_ref(), infimum, &points, &t_grid, ls.epsilon)?;
        for x in &points {
            let predicted = predicted_threshold(*kind, mem, x, ls.epsilon);
            let below: Vec<f64> = tab.rows.iter().filter(|r| &r.x == x && r.t <= predicted).map(|r| r.gap).collect();
            let worst = below.iter().cloned().fold(0.0, f64::max);
            let mut rec = Record::at_most(format!("gap below T for {} at x = {x:?}", tab.label), anchor::LIOUVILLE, worst, ls.epsilon);
            rec.pass &= !below.is_empty();
            records.push(rec);
        }
        table.rows.extend(tab.rows.iter().map(|r| {
            let mut row = vec![mi as f64];
            row.extend(&r.x);
            row.extend([r.t, r.u, r.gap]);
            row
        }));
        let predicted: Vec<f64> = points.iter().map(|x| predicted_threshold(*kind, mem, x, ls.epsilon)).collect();
        tables.push(json!({"label": tab.label, "thresholds": tab.thresholds, "predicted": predicted}));
    }
    let det = json!({"points": points, "members": tables});
    Ok(Outcome { report: Report::new(config, records, det), table: Some(table) })
}

pub fn cmd_recurrence(config: &RunConfig) -> Result<Outcome, CliError> {
    let drift = config.drift_model()?;
    let model = OUModel::new(drift.clone());
    let verdict = ou::recurrence_verdict(&model)?;
    let mut records = vec![
        Record::holds("kalman", anchor::KALMAN, verdict.kalman_ok),
        Record::holds("hr agrees with integral test", anchor::HR, verdict.verdict != Verdict::Unknown),
    ];
    let identity_q = drift.diffusion() == &nalgebra::DMatrix::identity(drift.dim(), drift.dim());
    if let (Some(ev), true, true) = (&verdict.evidence, drift.is_antisymmetric(), identity_q) {
        let n = drift.dim() as f64;
        let dev = ev
            .times
            .iter()
            .zip(&ev.log_det)
            .map(|(t, ld)| (ld - n * t.ln()).abs())
            .fold(0.0, f64::max);
        records.push(Record::at_most("log det Q_t - N log t", anchor::GRAMIAN, dev, 1e-8));
    }
    if let Some(expect) = config.expect {
        let want = match expect {
            Expectation::Recurrent => Verdict::Recurrent,
            Expectation::Transient => Verdict::Transient,
            Expectation::Unknown => Verdict::Unknown,
        };
        records.push(Record::holds(format!("verdict {want:?}"), anchor::VERDICT, verdict.verdict == want));
    }
    Ok(Outcome { report: Report::new(config, records, details(&verdict)?), table: None })
}

pub fn cmd_simulate(config: &RunConfig) -> Result<Outcome, CliError> {
    let drift = config.drift_model()?;
    let model = OUModel::new(drift);
    let n = model.dim();
    let sim = &config.simulate;
    let seed = config.seed();
    let x0 = sim.x0.clone().unwrap_or_else(|| vec![0.0; n]);
    let mut records = Vec::new();
    let mut det = serde_json::Map::new();

    if !(sim.path_step > 0.0) || !(sim.path_horizon >= sim.path_step) {
        return Err(CliError::Config { field: "simulate.path_step".into(), message: "need path_step > 0 and path_horizon ≥ path_step".into() });
    }
    let steps = (sim.path_horizon / sim.path_step + 1e-9).floor() as usize;
    let t_grid: Vec<f64> = (0..=steps).map(|k| k as f64 * sim.path_step).collect();
    let path = ou::sample_path(&model, &DVector::from_vec(x0.clone()), &t_grid, seed.wrapping_add(3))?;
    records.push(Record::holds("path finite", anchor::TRANSITION, path.iter().all(|x| x.iter().all(|v| v.is_finite()))));
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    let rows = t_grid
        .iter()
        .zip(&path)
        .map(|(&t, x)| std::iter::once(t).chain(x.iter().cloned()).collect())
        .collect();
    let table = Table { header, rows };

    if let Some(b) = &sim.ball {
        let ball = Ball::new(b.center.clone(), b.radius)?;
        let mc = &config.monte_carlo;
        let plan = PathPlan { n_paths: mc.n_paths, step: mc.step, horizon: mc.horizon, seed, execution: config.execution };
        let mut horizons: Vec<f64> = sim.horizons.iter().cloned().filter(|&h| h >= mc.step && h <= mc.horizon).collect();
        horizons.push(mc.horizon);
        horizons.sort_by(f64::total_cmp);
        horizons.dedup();
        let sweep = ou::hitting_sweep(&model, &x0, &ball, &horizons, &plan)?;
        records.push(Record::holds("hitting nondecreasing in horizon", anchor::HITTING, sweep.windows(2).all(|w| w[0].p_hat <= w[1].p_hat)));
        let main = sweep.last().expect("main horizon present");
        if let Some([lo, hi]) = sim.expect_hitting {
            let mut rec = Record::at_most("hitting probability in range", anchor::HITTING, main.p_hat, hi);
            rec.pass &= main.p_hat >= lo;
            records.push(rec);
        }
        det.insert("hitting".into(), details(&sweep)?);

        if sim.occupation {
            let occ_plan = PathPlan { seed: seed.wrapping_add(1), ..plan };
            let occ = ou::occupation_time(&model, &x0, &ball, &occ_plan, true)?;
            let analytic = occ.analytic.unwrap_or(f64::NAN);
            records.push(Record::at_most(
                "occupation time vs potential",
                anchor::OCCUPATION,
                (occ.mean - analytic).abs(),
                4.0 * occ.std_error + 2.0 * mc.step,
            ));
            det.insert("occupation".into(), details(&occ)?);
        }

        if !sim.excessivity_points.is_empty() {
            let ex_plan = PathPlan {
                n_paths: sim.excessivity_paths,
                step: sim.excessivity_step,
                horizon: sim.excessivity_horizon,
                seed: seed.wrapping_add(2),
                execution: config.execution,
            };
            let ex = ou::excessivity_check(&model, &ball, &sim.excessivity_points, &sim.r_list, &ex_plan)?;
            for row in &ex.rows {
                let mut rec = Record::at_most(
                    format!("P_r phi <= phi at x = {:?}, r = {}", row.x, row.r),
                    anchor::EXCESSIVE,
                    row.pr_phi - row.phi,
                    3.0 * (row.phi_se.powi(2) + row.pr_phi_se.powi(2)).sqrt(),
                );
                rec.pass = row.pass;
                records.push(rec);
            }
            records.push(Record::holds("P_r phi monotone as r decreases", anchor::EXCESSIVE, ex.monotone));
            det.insert("excessivity".into(), details(&ex)?);
        }
    }
    Ok(Outcome { report: Report::new(config, records, serde_json::Value::Object(det)), table: Some(table) })
}
