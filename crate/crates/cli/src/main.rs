use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use oukl_cli::{exit, CliError, RunConfig, Suite};

/// Runs one verification suite and writes a JSON report.
#[derive(Debug, Parser)]
#[command(name = "oukl", version)]
struct Args {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Report path (default: `output.report` from the config, else stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// mvf-check, onion-theta, harnack, liouville, recurrence or simulate.
    #[arg(long)]
    suite: Option<String>,
    /// CSV side file for suites that emit tables.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("OUKL_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config { field: "OUKL_THREADS".into(), message: format!("expected a positive integer, got {raw:?}") })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn execute(args: Args) -> Result<i32, CliError> {
    configure_threads()?;
    let suite = match &args.suite {
        Some(s) => Some(Suite::parse(s).ok_or_else(|| CliError::Config { field: "--suite".into(), message: format!("unknown suite {s:?}") })?),
        None => None,
    };
    let config = RunConfig::load(&args.config)?.resolve(args.seed, suite)?;
    let outcome = oukl_cli::run(&config)?;
    let json = outcome.report.to_json()?;
    match args.out.as_ref().or(config.output.report.as_ref()) {
        Some(path) => std::fs::write(path, json)?,
        None => print!("{json}"),
    }
    if let (Some(table), Some(path)) = (&outcome.table, args.csv.as_ref().or(config.output.csv.as_ref())) {
        table.save(path)?;
    }
    for rec in outcome.report.failed() {
        eprintln!("FAIL {}: value {:e}, tolerance {:e}", rec.name, rec.value, rec.tolerance);
    }
    Ok(if outcome.report.pass { exit::PASS } else { exit::SUITE_FAILURE })
}

fn main() -> ExitCode {
    let args = Args::parse();
    let code = match std::panic::catch_unwind(|| execute(args)) {
        Ok(Ok(code)) => code,
        Ok(Err(e)) => {
            eprintln!("{}", e.diagnostic());
            e.exit_code()
        }
        Err(_) => {
            eprintln!("{}", CliError::Internal("panic during run".into()).diagnostic());
            exit::INTERNAL
        }
    };
    ExitCode::from(code as u8)
}
