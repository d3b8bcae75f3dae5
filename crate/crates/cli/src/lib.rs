//! Batch front end of the oukl toolkit: configuration, verification suites and
//! machine-readable reports.

pub mod config;
pub mod report;
pub mod suites;

pub use config::{RunConfig, Suite};
pub use report::{Record, Report};

/// Failures that stop a run before a report exists.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => exit::CONFIG,
            CliError::Internal(_) => exit::INTERNAL,
        }
    }

    /// One-line JSON diagnostic for stderr.
    pub fn diagnostic(&self) -> String {
        let value = match self {
            CliError::Config { field, message } => serde_json::json!({
                "error": "config",
                "field": field,
                "message": message,
                "exit_code": self.exit_code(),
            }),
            CliError::Internal(message) => serde_json::json!({
                "error": "internal",
                "message": message,
                "exit_code": self.exit_code(),
            }),
        };
        value.to_string()
    }
}

impl From<oukl_core::Error> for CliError {
    fn from(e: oukl_core::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

pub mod exit {
    pub const PASS: i32 = 0;
    pub const SUITE_FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const INTERNAL: i32 = 3;
}

/// Output of a suite: the report plus an optional CSV table.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub table: Option<report::Table>,
}

/// Runs the suite selected in a resolved config.
pub fn run(config: &RunConfig) -> Result<Outcome, CliError> {
    let start = std::time::Instant::now();
    let mut out = match config.suite() {
        Suite::MvfCheck => suites::cmd_mvf_check(config),
        Suite::OnionTheta => suites::cmd_onion_theta(config),
        Suite::Harnack => suites::cmd_harnack(config),
        Suite::Liouville => suites::cmd_liouville(config),
        Suite::Recurrence => suites::cmd_recurrence(config),
        Suite::Simulate => suites::cmd_simulate(config),
    }?;
    out.report.timing = Some(report::Timing { elapsed_seconds: start.elapsed().as_secs_f64() });
    Ok(out)
}
