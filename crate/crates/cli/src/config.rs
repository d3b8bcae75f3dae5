//! Run configuration: JSON file plus command-line overrides.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use oukl_core::{DriftModel, Execution, QuadratureConfig, Scheme};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    MvfCheck,
    OnionTheta,
    Harnack,
    Liouville,
    Recurrence,
    Simulate,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::MvfCheck => "mvf-check",
            Suite::OnionTheta => "onion-theta",
            Suite::Harnack => "harnack",
            Suite::Liouville => "liouville",
            Suite::Recurrence => "recurrence",
            Suite::Simulate => "simulate",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).ok()
    }

    /// Suites built on the group structure, which needs antisymmetric `B`.
    pub fn needs_antisymmetry(self) -> bool {
        !matches!(self, Suite::Recurrence | Suite::Simulate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub n: usize,
    /// Rows of `B`.
    pub b: Vec<Vec<f64>>,
    /// Rows of `Q`; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    pub scheme: Scheme,
    pub n_slices: usize,
    pub n_per_slice: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        let d = QuadratureConfig::default();
        Self { scheme: d.scheme, n_slices: d.n_slices, n_per_slice: d.n_per_slice }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloSpec {
    pub n_paths: usize,
    pub step: f64,
    pub horizon: f64,
}

impl Default for MonteCarloSpec {
    fn default() -> Self {
        Self { n_paths: 2_000, step: 1e-3, horizon: 50.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MvfSpec {
    /// Random `(z0, r)` pairs per corpus family.
    pub pairs: usize,
    pub tolerance: f64,
}

impl Default for MvfSpec {
    fn default() -> Self {
        Self { pairs: 20, tolerance: 2e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThetaSpec {
    /// Random `Σ_r` points per radius.
    pub sigma_points: usize,
}

impl Default for ThetaSpec {
    fn default() -> Self {
        Self { sigma_points: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarnackSpec {
    pub samples: usize,
    pub sigma_points: usize,
    pub onion_points: usize,
    pub slope_tolerance: f64,
}

impl Default for HarnackSpec {
    fn default() -> Self {
        Self { samples: 10_000, sigma_points: 16, onion_points: 1_024, slope_tolerance: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LiouvilleSpec {
    pub epsilon: f64,
    pub points: Vec<Vec<f64>>,
    pub t_min: f64,
    pub t_step: f64,
}

impl Default for LiouvilleSpec {
    fn default() -> Self {
        Self { epsilon: 1e-6, points: Vec::new(), t_min: -60.0, t_step: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSpec {
    pub x0: Option<Vec<f64>>,
    pub ball: Option<BallSpec>,
    /// Horizons of the hitting sweep (the main horizon is always included).
    pub horizons: Vec<f64>,
    /// Accepted range for the hitting probability at the main horizon.
    pub expect_hitting: Option<[f64; 2]>,
    /// Grid step of the dumped path.
    pub path_step: f64,
    pub path_horizon: f64,
    pub occupation: bool,
    pub excessivity_points: Vec<Vec<f64>>,
    pub r_list: Vec<f64>,
    pub excessivity_paths: usize,
    pub excessivity_step: f64,
    pub excessivity_horizon: f64,
}

impl Default for SimulateSpec {
    fn default() -> Self {
        Self {
            x0: None,
            ball: None,
            horizons: Vec::new(),
            expect_hitting: None,
            path_step: 1e-2,
            path_horizon: 10.0,
            occupation: true,
            excessivity_points: Vec::new(),
            r_list: vec![1.0, 0.1, 0.01],
            excessivity_paths: 1_000,
            excessivity_step: 1e-2,
            excessivity_horizon: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expectation {
    Recurrent,
    Transient,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub report: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

/// Everything a run needs; `seed` has no default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub suite: Option<Suite>,
    pub model: ModelSpec,
    #[serde(default = "default_p")]
    pub p: u32,
    #[serde(default = "default_r_grid")]
    pub r_grid: Vec<f64>,
    #[serde(default)]
    pub execution: Execution,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub monte_carlo: MonteCarloSpec,
    #[serde(default)]
    pub mvf: MvfSpec,
    #[serde(default)]
    pub theta: ThetaSpec,
    #[serde(default)]
    pub harnack: HarnackSpec,
    #[serde(default)]
    pub liouville: LiouvilleSpec,
    #[serde(default)]
    pub simulate: SimulateSpec,
    /// Expected recurrence verdict, checked by the recurrence suite.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expectation>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_p() -> u32 {
    5
}

fn default_r_grid() -> Vec<f64> {
    vec![0.1, 1.0, 10.0]
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config { field: field.to_string(), message: message.into() }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            invalid(if field == "." { "<root>" } else { &field }, e.into_inner().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid("--config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Applies overrides and checks everything the suites rely on.
    pub fn resolve(mut self, seed: Option<u64>, suite: Option<Suite>) -> Result<Self, CliError> {
        if seed.is_some() {
            self.seed = seed;
        }
        if suite.is_some() {
            self.suite = suite;
        }
        if self.seed.is_none() {
            return Err(invalid("seed", "a seed is required (config field or --seed)"));
        }
        let suite = self.suite.ok_or_else(|| invalid("suite", "no suite selected (config field or --suite)"))?;
        let model = self.drift_model()?;
        if suite.needs_antisymmetry() && !model.is_antisymmetric() {
            return Err(invalid("model.b", format!("suite {} needs an antisymmetric drift", suite.name())));
        }
        if self.p == 0 {
            return Err(invalid("p", "kernel order must be at least 1"));
        }
        if matches!(suite, Suite::Harnack) && self.p <= 4 {
            return Err(invalid("p", "the Harnack suite needs p > 4"));
        }
        if self.r_grid.is_empty() || self.r_grid.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(invalid("r_grid", "radii must be positive and finite"));
        }
        if self.quadrature.n_slices == 0 || self.quadrature.n_per_slice == 0 {
            return Err(invalid("quadrature", "counts must be at least 1"));
        }
        let mc = &self.monte_carlo;
        if mc.n_paths == 0 || !(mc.step > 0.0) || !(mc.horizon >= mc.step) {
            return Err(invalid("monte_carlo", "need n_paths ≥ 1, step > 0 and horizon ≥ step"));
        }
        let n = self.model.n;
        if let Some(x0) = &self.simulate.x0 {
            if x0.len() != n {
                return Err(invalid("simulate.x0", format!("expected {n} coordinates, got {}", x0.len())));
            }
        }
        if let Some(b) = &self.simulate.ball {
            if b.center.len() != n {
                return Err(invalid("simulate.ball.center", format!("expected {n} coordinates, got {}", b.center.len())));
            }
            if !(b.radius > 0.0) {
                return Err(invalid("simulate.ball.radius", "radius must be positive"));
            }
        }
        if self.simulate.excessivity_points.iter().any(|x| x.len() != n) {
            return Err(invalid("simulate.excessivity_points", format!("every point needs {n} coordinates")));
        }
        if self.liouville.points.iter().any(|x| x.len() != n) {
            return Err(invalid("liouville.points", format!("every point needs {n} coordinates")));
        }
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("resolved config has a seed")
    }

    pub fn suite(&self) -> Suite {
        self.suite.expect("resolved config has a suite")
    }

    pub fn drift_model(&self) -> Result<DriftModel, CliError> {
        let n = self.model.n;
        if n == 0 {
            return Err(invalid("model.n", "dimension must be at least 1"));
        }
        let b = square(&self.model.b, n, "model.b")?;
        let q = match &self.model.q {
            Some(q) => square(q, n, "model.q")?,
            None => DMatrix::identity(n, n),
        };
        DriftModel::with_diffusion(b, q).map_err(|e| invalid("model", e.to_string()))
    }

    pub fn quadrature_config(&self) -> QuadratureConfig {
        QuadratureConfig {
            scheme: self.quadrature.scheme,
            n_slices: self.quadrature.n_slices,
            n_per_slice: self.quadrature.n_per_slice,
            seed: self.seed(),
            execution: self.execution,
        }
    }
}

fn square(rows: &[Vec<f64>], n: usize, field: &str) -> Result<DMatrix<f64>, CliError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        let shape: Vec<usize> = rows.iter().map(Vec::len).collect();
        return Err(invalid(field, format!("expected a {n}x{n} matrix, got rows of lengths {shape:?}")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid(field, "entries must be finite"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}
