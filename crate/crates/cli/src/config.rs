//! Argument parsing and the resolved run configuration.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use whl_core::parse::Field;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Index,
    Milnor,
    Theta,
    Pardist,
    Agmon,
    Spectrum,
    Heattrace,
    Tameness,
    Compare,
    Probe,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Index => "index",
            Command::Milnor => "milnor",
            Command::Theta => "theta",
            Command::Pardist => "pardist",
            Command::Agmon => "agmon",
            Command::Spectrum => "spectrum",
            Command::Heattrace => "heattrace",
            Command::Tameness => "tameness",
            Command::Compare => "compare",
            Command::Probe => "probe",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FieldArg {
    Real,
    Complex,
}

impl FieldArg {
    pub fn core(self) -> Field {
        match self {
            FieldArg::Real => Field::Real,
            FieldArg::Complex => Field::Complex,
        }
    }

    fn name(self) -> &'static str {
        match self {
            FieldArg::Real => "real",
            FieldArg::Complex => "complex",
        }
    }
}

/// `--grid L,N`: half-width and number of nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub points: usize,
}

fn parse_grid(s: &str) -> Result<GridSpec, String> {
    let (l, n) = s.split_once(',').ok_or("expected L,N")?;
    let half_width: f64 = l.trim().parse().map_err(|e| format!("bad L: {e}"))?;
    let points: usize = n.trim().parse().map_err(|e| format!("bad N: {e}"))?;
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err("L must be positive".into());
    }
    if points < 5 {
        return Err("N must be at least 5".into());
    }
    Ok(GridSpec { half_width, points })
}

#[derive(Parser, Debug)]
#[command(name = "whl", version, about = "Witten-deformation heat kernels, spectra and index integrals")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Index integral of a real or complex polynomial.
    Index(Flags),
    /// Quasi-homogeneous weights, Milnor number and its integral.
    Milnor(Flags),
    /// Parametrix coefficients of the heat kernel.
    Theta(ThetaFlags),
    /// Parabolic distance by action minimization.
    Pardist(Flags),
    /// Agmon distance and eigenfunction decay.
    Agmon(Flags),
    /// Witten Laplacian eigenvalues on a line.
    Spectrum(Flags),
    /// Heat traces and supertrace on a line.
    Heattrace(Flags),
    /// Weights, nondegeneracy screen and sublevel growth.
    Tameness(Flags),
    /// Parametrix against the spectral heat kernel.
    Compare(Flags),
    /// PDE defect and coefficient bounds of the parametrix.
    Probe(Flags),
}

#[derive(Args, Debug, Clone)]
struct Flags {
    /// Polynomial in x1..xn (real) or z1..zn (complex).
    #[arg(long, allow_hyphen_values = true)]
    poly: String,
    #[arg(long)]
    nvars: Option<usize>,
    #[arg(long, value_enum)]
    field: Option<FieldArg>,
    /// Time or comma-separated list of times.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    t: Vec<f64>,
    /// Coupling constant.
    #[arg(long = "T", allow_hyphen_values = true)]
    coupling: Option<f64>,
    /// Use the coupling T = t^(-1/2).
    #[arg(long)]
    couple: bool,
    #[arg(long)]
    order: Option<usize>,
    /// Grid half-width and node count.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<GridSpec>,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Start point, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Option<Vec<f64>>,
    /// End point, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    y: Option<Vec<f64>>,
    /// Spectral parameters, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambda: Vec<f64>,
    /// Number of eigenvalues or random samples.
    #[arg(long)]
    count: Option<usize>,
    /// Numerical tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct ThetaFlags {
    #[command(flatten)]
    flags: Flags,
    /// Check the T-degree bound of every coefficient.
    #[arg(long)]
    check_grading: bool,
}

pub const DEFAULT_SEED: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub poly: String,
    pub nvars: usize,
    pub field: FieldArg,
    pub t: Vec<f64>,
    #[serde(rename = "T")]
    pub coupling: Option<f64>,
    pub couple: bool,
    pub order: Option<usize>,
    pub grid: Option<GridSpec>,
    pub mc_samples: Option<usize>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub check_grading: bool,
    pub x: Option<Vec<f64>>,
    pub y: Option<Vec<f64>>,
    pub lambda: Vec<f64>,
    pub count: Option<usize>,
    pub tol: Option<f64>,
}

/// Outcome of argument parsing.
pub enum Parsed {
    Run(Box<RunConfig>),
    /// Help or version text, printed with exit code 0.
    Info(String),
}

impl RunConfig {
    pub fn parse<I, S>(argv: I) -> Result<Parsed, CliError>
    where
        I: IntoIterator<Item = S>,
        S: Into<OsString> + Clone,
    {
        let cli = match Cli::try_parse_from(argv) {
            Ok(c) => c,
            Err(e) => {
                use clap::error::ErrorKind;
                return match e.kind() {
                    ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Ok(Parsed::Info(e.to_string())),
                    _ => Err(CliError::Usage(e.to_string())),
                };
            }
        };
        let (command, flags, check_grading) = match cli.command {
            Sub::Index(f) => (Command::Index, f, false),
            Sub::Milnor(f) => (Command::Milnor, f, false),
            Sub::Theta(f) => (Command::Theta, f.flags, f.check_grading),
            Sub::Pardist(f) => (Command::Pardist, f, false),
            Sub::Agmon(f) => (Command::Agmon, f, false),
            Sub::Spectrum(f) => (Command::Spectrum, f, false),
            Sub::Heattrace(f) => (Command::Heattrace, f, false),
            Sub::Tameness(f) => (Command::Tameness, f, false),
            Sub::Compare(f) => (Command::Compare, f, false),
            Sub::Probe(f) => (Command::Probe, f, false),
        };
        let field = flags.field.unwrap_or_else(|| infer_field(command, &flags.poly));
        let nvars = match flags.nvars {
            Some(n) => n,
            None => infer_nvars(&flags.poly, field),
        };
        let cfg = RunConfig {
            command,
            poly: flags.poly,
            nvars,
            field,
            t: flags.t,
            coupling: flags.coupling,
            couple: flags.couple,
            order: flags.order,
            grid: flags.grid,
            mc_samples: flags.mc_samples,
            seed: flags.seed.unwrap_or(DEFAULT_SEED),
            out: flags.out,
            check_grading,
            x: flags.x,
            y: flags.y,
            lambda: flags.lambda,
            count: flags.count,
            tol: flags.tol,
        };
        cfg.validate()?;
        Ok(Parsed::Run(Box::new(cfg)))
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        if self.nvars == 0 {
            return bad("--nvars must be at least 1".into());
        }
        if let Some(t) = self.t.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return bad(format!("--t values must be positive, got {t}"));
        }
        if let Some(c) = self.coupling {
            if !(c >= 0.0 && c.is_finite()) {
                return bad(format!("--T must be nonnegative, got {c}"));
            }
            if self.couple {
                return bad("--couple sets T; do not pass --T as well".into());
            }
        }
        if self.couple && self.t.is_empty() {
            return bad("--couple needs --t".into());
        }
        if let Some(s) = self.mc_samples {
            if s < 2 {
                return bad("--mc-samples must be at least 2".into());
            }
        }
        if let Some(tol) = self.tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return bad(format!("--tol must be positive, got {tol}"));
            }
        }
        for (name, p) in [("--x", &self.x), ("--y", &self.y)] {
            if let Some(p) = p {
                if p.len() != self.nvars {
                    return bad(format!("{name} needs {} coordinates, got {}", self.nvars, p.len()));
                }
                if p.iter().any(|v| !v.is_finite()) {
                    return bad(format!("{name} has a non-finite coordinate"));
                }
            }
        }
        if let Some(l) = self.lambda.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return bad(format!("--lambda values must be nonnegative, got {l}"));
        }
        if self.count == Some(0) {
            return bad("--count must be positive".into());
        }
        Ok(())
    }

    /// Coupling for time `t`.
    pub fn coupling_at(&self, t: f64) -> f64 {
        if self.couple {
            t.powf(-0.5)
        } else {
            self.coupling.unwrap_or(1.0)
        }
    }

    /// Arguments that parse back to this configuration.
    pub fn to_argv(&self) -> Vec<String> {
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut a = vec![
            "whl".to_string(),
            self.command.name().to_string(),
            format!("--poly={}", self.poly),
            format!("--nvars={}", self.nvars),
            format!("--field={}", self.field.name()),
            format!("--seed={}", self.seed),
        ];
        if !self.t.is_empty() {
            a.push(format!("--t={}", list(&self.t)));
        }
        if let Some(c) = self.coupling {
            a.push(format!("--T={c}"));
        }
        if self.couple {
            a.push("--couple".into());
        }
        if let Some(k) = self.order {
            a.push(format!("--order={k}"));
        }
        if let Some(g) = self.grid {
            a.push(format!("--grid={},{}", g.half_width, g.points));
        }
        if let Some(s) = self.mc_samples {
            a.push(format!("--mc-samples={s}"));
        }
        if let Some(o) = &self.out {
            a.push(format!("--out={}", o.display()));
        }
        if self.check_grading {
            a.push("--check-grading".into());
        }
        if let Some(x) = &self.x {
            a.push(format!("--x={}", list(x)));
        }
        if let Some(y) = &self.y {
            a.push(format!("--y={}", list(y)));
        }
        if !self.lambda.is_empty() {
            a.push(format!("--lambda={}", list(&self.lambda)));
        }
        if let Some(c) = self.count {
            a.push(format!("--count={c}"));
        }
        if let Some(t) = self.tol {
            a.push(format!("--tol={t}"));
        }
        a
    }
}

fn infer_field(command: Command, poly: &str) -> FieldArg {
    if command == Command::Milnor || poly.contains('z') {
        FieldArg::Complex
    } else {
        FieldArg::Real
    }
}

/// Largest variable index in the string, or 1.
fn infer_nvars(poly: &str, field: FieldArg) -> usize {
    let prefix = match field {
        FieldArg::Real => 'x',
        FieldArg::Complex => 'z',
    };
    let chars: Vec<char> = poly.chars().collect();
    let mut n = 1;
    for (i, &c) in chars.iter().enumerate() {
        if c != prefix {
            continue;
        }
        let digits: String = chars[i + 1..].iter().take_while(|d| d.is_ascii_digit()).collect();
        if let Ok(k) = digits.parse::<usize>() {
            n = n.max(k);
        }
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(args: &[&str]) -> RunConfig {
        match RunConfig::parse(args.iter().copied()).unwrap() {
            Parsed::Run(c) => *c,
            Parsed::Info(_) => panic!("unexpected info"),
        }
    }

    #[test]
    fn infers_field_and_dimension() {
        let c = cfg(&["whl", "milnor", "--poly", "z1^3+z2^3"]);
        assert_eq!((c.field, c.nvars), (FieldArg::Complex, 2));
        let c = cfg(&["whl", "index", "--poly", "x^2/2"]);
        assert_eq!((c.field, c.nvars), (FieldArg::Real, 1));
        let c = cfg(&["whl", "index", "--poly", "x1*x12"]);
        assert_eq!(c.nvars, 12);
    }

    #[test]
    fn argv_roundtrip() {
        let c = cfg(&[
            "whl", "theta", "--poly", "-x1^2/2", "--order", "2", "--check-grading", "--t", "0.1,0.25", "--T", "1.5",
            "--grid", "8,101", "--x", "-0.5", "--y", "0.25", "--lambda", "1,2,4", "--tol", "1e-9",
        ]);
        assert_eq!(c.t, vec![0.1, 0.25]);
        assert_eq!(c.x, Some(vec![-0.5]));
        assert_eq!(cfg(&c.to_argv().iter().map(String::as_str).collect::<Vec<_>>()), c);
    }

    #[test]
    fn rejects_bad_values() {
        for args in [
            vec!["whl", "index", "--poly", "x^2", "--t", "-1"],
            vec!["whl", "index", "--poly", "x^2", "--grid", "3"],
            vec!["whl", "index", "--poly", "x^2", "--couple"],
            vec!["whl", "index", "--poly", "x^2", "--t", "1", "--couple", "--T", "2"],
            vec!["whl", "index", "--poly", "x^2", "--bogus"],
            vec!["whl", "frobnicate", "--poly", "x^2"],
            vec!["whl", "index", "--poly", "x1", "--nvars", "2", "--x", "1"],
            vec!["whl", "index", "--poly", "x^2", "--check-grading"],
        ] {
            assert!(matches!(RunConfig::parse(args.clone()), Err(CliError::Usage(_))), "{args:?}");
        }
    }
}
