//! The `whl` command-line tool.
//!
//! [`run`] parses arguments, dispatches to a subcommand and writes a JSON
//! manifest. Exit codes: 0 success, 1 invalid input, 2 a numerical check or
//! tolerance failed.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod commands;
pub mod config;

pub use config::{Command, FieldArg, GridSpec, Parsed, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] whl_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn is_numeric(&self) -> bool {
        use whl_core::Error as E;
        matches!(
            self,
            CliError::Core(E::TailBound { .. } | E::ToleranceExceeded { .. } | E::NoConvergence(_) | E::NonFinite(_))
        )
    }

    /// The failing check recorded for a numerical error.
    fn as_check(&self) -> Check {
        use whl_core::Error as E;
        let (name, measured, tolerance) = match self {
            CliError::Core(E::TailBound { bound, tol }) => ("tail-bound", Some(*bound), Some(*tol)),
            CliError::Core(E::ToleranceExceeded { estimate, tol }) => ("error-estimate", Some(*estimate), Some(*tol)),
            CliError::Core(E::NoConvergence(n)) => ("convergence", Some(*n as f64), None),
            _ => ("finite-values", None, None),
        };
        Check {
            name: name.into(),
            passed: false,
            measured: measured.filter(|v| v.is_finite()),
            tolerance,
            detail: self.to_string(),
        }
    }
}

/// One pass/fail verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: Option<f64>,
    pub tolerance: Option<f64>,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, measured: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            measured: measured.is_finite().then_some(measured),
            tolerance: tolerance.is_finite().then_some(tolerance),
            detail: detail.into(),
        }
    }

    /// Passes when `measured <= tolerance`.
    pub fn at_most(name: &str, measured: f64, tolerance: f64) -> Self {
        Self::new(name, measured <= tolerance, measured, tolerance, "")
    }
}

/// Rows written as CSV.
#[derive(Clone, Debug)]
pub struct Table {
    pub file: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub result: serde_json::Value,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
}

/// Deterministic part of a run: identical for identical configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Payload {
    pub config: RunConfig,
    pub checks: Vec<Check>,
    pub result: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub whl: String,
    pub whl_core: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub versions: Versions,
    pub seeds: Vec<u64>,
    pub threads: Option<usize>,
    pub wall_time_seconds: f64,
    pub status: String,
    pub exit_code: i32,
    pub checks: Vec<Check>,
    pub files: Vec<String>,
    pub result: serde_json::Value,
}

/// Runs the tool on `argv` (including the program name) and returns the
/// exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cfg = match RunConfig::parse(argv) {
        Ok(Parsed::Run(c)) => c,
        Ok(Parsed::Info(text)) => {
            print!("{text}");
            return EXIT_OK;
        }
        Err(e) => {
            eprintln!("whl: {e}");
            return EXIT_INVALID;
        }
    };
    let threads = match threads_from_env() {
        Ok(t) => t,
        Err(e) => {
            eprintln!("whl: {e}");
            return EXIT_INVALID;
        }
    };
    match execute(&cfg, threads) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("whl: {e}");
            if e.is_numeric() {
                EXIT_NUMERIC
            } else {
                EXIT_INVALID
            }
        }
    }
}

fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var("WHL_THREADS") {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("WHL_THREADS must be a positive integer, got `{s}`"))),
        },
    }
}

fn execute(cfg: &RunConfig, threads: Option<usize>) -> Result<i32, CliError> {
    let start = Instant::now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker threads: {e}")))?;
    let outcome = match pool.install(|| commands::dispatch(cfg)) {
        Ok(o) => o,
        Err(e) if e.is_numeric() => Outcome {
            result: serde_json::Value::Null,
            checks: vec![e.as_check()],
            tables: Vec::new(),
        },
        Err(e) => return Err(e),
    };
    let passed = outcome.checks.iter().all(|c| c.passed);
    let exit_code = if passed { EXIT_OK } else { EXIT_NUMERIC };
    for c in outcome.checks.iter().filter(|c| !c.passed) {
        eprintln!(
            "whl: check `{}` failed: measured {:?}, tolerance {:?} {}",
            c.name, c.measured, c.tolerance, c.detail
        );
    }
    let files: Vec<String> = outcome.tables.iter().map(|t| t.file.clone()).collect();
    let payload = Payload {
        config: cfg.clone(),
        checks: outcome.checks.clone(),
        result: outcome.result.clone(),
    };
    let manifest = Manifest {
        config: cfg.clone(),
        versions: Versions {
            whl: env!("CARGO_PKG_VERSION").into(),
            whl_core: whl_core::VERSION.into(),
        },
        seeds: vec![cfg.seed],
        threads,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        status: if passed { "ok" } else { "check-failed" }.into(),
        exit_code,
        checks: outcome.checks,
        files,
        result: outcome.result,
    };
    if let Some(dir) = &cfg.out {
        write_artifacts(dir, &payload, &manifest, &outcome.tables)?;
    }
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &manifest)?;
    writeln!(out)?;
    Ok(exit_code)
}

fn write_artifacts(dir: &Path, payload: &Payload, manifest: &Manifest, tables: &[Table]) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("result.json"), serde_json::to_string_pretty(payload)? + "\n")?;
    for t in tables {
        fs::write(dir.join(&t.file), t.to_csv())?;
    }
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(manifest)? + "\n")?;
    Ok(())
}
