//! Report records, JSON serialization with round-trip floats, CSV tables.

use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::config::RunConfig;
use crate::CliError;

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// One check: `pass` is decided by the suite, `value` and `tolerance` document it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub name: String,
    /// Statement of the theory the check exercises.
    pub anchor: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Record {
    /// Passes when `value ≤ tolerance`.
    pub fn at_most(name: impl Into<String>, anchor: &str, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), anchor: anchor.to_string(), value, tolerance, pass: value <= tolerance }
    }

    /// A yes/no check reported as value 1 (true) or 0, tolerance 1.
    pub fn holds(name: impl Into<String>, anchor: &str, ok: bool) -> Self {
        Self { name: name.into(), anchor: anchor.to_string(), value: ok as u8 as f64, tolerance: 1.0, pass: ok }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub suite: String,
    pub config: RunConfig,
    pub records: Vec<Record>,
    pub details: serde_json::Value,
    pub pass: bool,
    /// Excluded from the canonical form.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl Report {
    pub fn new(config: &RunConfig, records: Vec<Record>, details: serde_json::Value) -> Self {
        let pass = records.iter().all(|r| r.pass);
        Self {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            suite: config.suite().name().to_string(),
            config: config.clone(),
            records,
            details,
            pass,
            timing: None,
        }
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        to_json(self)
    }

    /// The report without timing: identical for identical config and seed.
    pub fn canonical_json(&self) -> Result<String, CliError> {
        to_json(&Report { timing: None, ..self.clone() })
    }

    pub fn failed(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| !r.pass)
    }
}

/// Pretty JSON whose floats carry 17 significant digits.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String, CliError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, RoundTrip(PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(|e| CliError::Internal(e.to_string()))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| CliError::Internal(e.to_string()))
}

/// Canonical form of a written report: parsed, timing dropped, re-serialized.
pub fn canonicalize(json: &str) -> Result<String, CliError> {
    let mut value: serde_json::Value = serde_json::from_str(json).map_err(|e| CliError::Internal(e.to_string()))?;
    if let Some(obj) = value.as_object_mut() {
        obj.remove("timing");
    }
    to_json(&value)
}

/// Formats every float as `d.dddddddddddddddde±x`.
struct RoundTrip<F>(F);

impl<F: Formatter> Formatter for RoundTrip<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        write!(w, "{:.16e}", value as f64)
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn end_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_key(w)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// A plot-ready table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<(), CliError> {
        let csv_err = |e: csv::Error| CliError::Internal(e.to_string());
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            out.write_record(row.iter().map(|v| format!("{v:.16e}"))).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        self.write_csv(std::fs::File::create(path)?)
    }
}
