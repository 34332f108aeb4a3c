use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use whl_cli::{Manifest, Parsed, Payload, RunConfig};

fn whl(args: &[&str], out: Option<&Path>, threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_whl"));
    cmd.args(args);
    if let Some(dir) = out {
        cmd.arg("--out").arg(dir);
    }
    match threads {
        Some(t) => cmd.env("WHL_THREADS", t),
        None => cmd.env_remove("WHL_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn parse(argv: &[String]) -> RunConfig {
    match RunConfig::parse(argv.iter().cloned()).unwrap() {
        Parsed::Run(c) => *c,
        Parsed::Info(_) => panic!("unexpected info"),
    }
}

#[test]
fn index_of_quadratic_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = whl(&["index", "--poly", "x1^2/2", "--nvars", "1", "--field", "real"], Some(dir.path()), None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&dir.path().join("result.json"));
    assert!((r["result"]["value"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(r["result"]["rounded"], 1);
}

#[test]
fn milnor_of_two_cubics() {
    let dir = tempfile::tempdir().unwrap();
    let o = whl(&["milnor", "--poly", "z1^3+z2^3"], Some(dir.path()), None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = &read_json(&dir.path().join("result.json"))["result"];
    assert_eq!(r["weights"], serde_json::json!(["1/3", "1/3"]));
    assert_eq!(r["mu"], 4);
    assert!((r["integral"].as_f64().unwrap() - 4.0).abs() < 5e-2);
}

#[test]
fn theta_grading_passes() {
    let o = whl(&["theta", "--poly", "x1^2/2", "--order", "3", "--check-grading"], None, None);
    assert_eq!(code(&o), 0);
    let m: Manifest = serde_json::from_slice(&o.stdout).unwrap();
    let grading = m.checks.iter().find(|c| c.name == "t-grading").unwrap();
    assert!(grading.passed);
    assert!(m.result["grading"]["violations"].as_array().unwrap().is_empty());
    assert_eq!(m.result["theta"]["order"], 3);
}

#[test]
fn manifest_round_trips_through_the_config_parser() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["spectrum", "--poly", "x^2/2", "--T", "1.5", "--count", "6", "--seed", "9"];
    let o = whl(&args, Some(dir.path()), None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    let m: Manifest = serde_json::from_str(&text).unwrap();
    let mut argv: Vec<String> = std::iter::once("whl".to_string()).chain(args.iter().map(|s| s.to_string())).collect();
    argv.push(format!("--out={}", dir.path().display()));
    assert_eq!(m.config, parse(&argv));
    assert_eq!(parse(&m.config.to_argv()), m.config);
    assert_eq!(serde_json::to_string_pretty(&m).unwrap() + "\n", text);
    assert_eq!(m.seeds, vec![9]);
    assert_eq!(m.versions.whl_core, whl_core::VERSION);
    assert_eq!(m.files, vec!["spectrum0.csv", "spectrum1.csv"]);
}

#[test]
fn same_seed_gives_identical_payload_across_thread_counts() {
    let args = ["index", "--poly", "x1^4/4 + x2^2/2", "--mc-samples", "200000", "--seed", "5"];
    let payloads: Vec<String> = [Some("1"), Some("3"), None]
        .into_iter()
        .map(|threads| {
            let dir = tempfile::tempdir().unwrap();
            let o = whl(&args, Some(dir.path()), threads);
            assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
            let text = std::fs::read_to_string(dir.path().join("result.json")).unwrap();
            let mut p: Payload = serde_json::from_str(&text).unwrap();
            p.config.out = None;
            serde_json::to_string(&p).unwrap()
        })
        .collect();
    assert_eq!(payloads[0], payloads[1]);
    assert_eq!(payloads[0], payloads[2]);
    let other = whl(&["index", "--poly", "x1^4/4 + x2^2/2", "--mc-samples", "200000", "--seed", "6"], None, None);
    let m: Manifest = serde_json::from_slice(&other.stdout).unwrap();
    let first: Payload = serde_json::from_str(&payloads[0]).unwrap();
    assert_ne!(m.result["value"], first.result["value"]);
}

#[test]
fn tolerance_failure_exits_two_and_records_the_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = whl(
        &["index", "--poly", "x^2/2", "--mc-samples", "1000", "--tol", "1e-9"],
        Some(dir.path()),
        None,
    );
    assert_eq!(code(&o), 2);
    let m: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m.exit_code, 2);
    assert_eq!(m.status, "check-failed");
    let c = &m.checks[0];
    assert_eq!(c.name, "error-estimate");
    assert!(!c.passed);
    assert!(c.measured.unwrap() > 1e-9);
    assert_eq!(c.tolerance, Some(1e-9));
}

#[test]
fn failing_check_exits_two() {
    let o = whl(&["milnor", "--poly", "z1^3 + z1*z2", "--mc-samples", "20000"], None, None);
    assert_eq!(code(&o), 2);
    let m: Manifest = serde_json::from_slice(&o.stdout).unwrap();
    assert!(m.checks.iter().any(|c| c.name == "nondegenerate" && !c.passed));
}

#[test]
fn malformed_input_exits_one_without_panicking() {
    let cases: &[&[&str]] = &[
        &[],
        &["frobnicate"],
        &["index"],
        &["index", "--poly", "x^"],
        &["index", "--poly", "(x^2/2"],
        &["index", "--poly", "x^2/0"],
        &["index", "--poly", "x^2.5"],
        &["index", "--poly", "y^2"],
        &["index", "--poly", "x1^2", "--nvars", "0"],
        &["index", "--poly", "x3^2", "--nvars", "2"],
        &["index", "--poly", "x^2", "--bogus"],
        &["index", "--poly", "x^2", "--t", "0"],
        &["index", "--poly", "x^2", "--t", "nan"],
        &["index", "--poly", "x^2", "--grid", "5"],
        &["index", "--poly", "x^2", "--grid", "-1,100"],
        &["index", "--poly", "x^2", "--mc-samples", "1"],
        &["index", "--poly", "x^2", "--couple"],
        &["index", "--poly", "x^2", "--check-grading"],
        &["index", "--poly", "x1^2+x2^2+x3^2+x4^2+x5^2+x6^2+x7^2"],
        &["milnor", "--poly", "z1^3+z2^4+z1*z2"],
        &["milnor", "--poly", "x^2", "--field", "real"],
        &["theta", "--poly", "z^2"],
        &["theta", "--poly", "x^2", "--order", "50"],
        &["spectrum", "--poly", "x1^2+x2^2"],
        &["spectrum", "--poly", "x^2/2", "--count", "100000"],
        &["heattrace", "--poly", "x"],
        &["agmon", "--poly", "x^2/2", "--T", "0"],
        &["agmon", "--poly", "x1^2+x2^2"],
        &["agmon", "--poly", "x^2", "--x", "0"],
        &["pardist", "--poly", "x^2", "--x", "0,1"],
        &["compare", "--poly", "x^2/2", "--x", "0.005"],
        &["tameness", "--poly", "x^2", "--lambda", "1,1,1"],
    ];
    for args in cases {
        let o = whl(args, None, None);
        assert_eq!(code(&o), 1, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!String::from_utf8_lossy(&o.stderr).contains("panicked"), "{args:?}");
    }
}

#[test]
fn parser_errors_report_a_position() {
    let o = whl(&["index", "--poly", "x^2 + * 3"], None, None);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("position"));
}

#[test]
fn bad_thread_count_is_rejected() {
    for t in ["0", "many", "-2"] {
        let o = whl(&["index", "--poly", "x^2/2"], None, Some(t));
        assert_eq!(code(&o), 1, "{t}");
    }
}

#[test]
fn help_and_version_exit_zero() {
    for a in ["--help", "--version"] {
        let o = whl(&[a], None, None);
        assert_eq!(code(&o), 0);
        assert!(!o.stdout.is_empty());
    }
}

#[test]
fn spectrum_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = whl(&["spectrum", "--poly", "x^2/2", "--count", "5"], Some(dir.path()), None);
    assert_eq!(code(&o), 0);
    for (file, first) in [("spectrum0.csv", 0.0), ("spectrum1.csv", 2.0)] {
        let text = std::fs::read_to_string(dir.path().join(file)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("k,lambda"));
        let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
        assert_eq!(rows.len(), 5);
        for (k, r) in rows.iter().enumerate() {
            assert_eq!(r[0], k as f64);
            assert!((r[1] - (first + 2.0 * k as f64)).abs() < 1e-4, "{file}: {r:?}");
        }
    }
}

#[test]
fn heattrace_writes_csv_with_constant_supertrace() {
    let dir = tempfile::tempdir().unwrap();
    let o = whl(&["heattrace", "--poly", "x^4/4", "--t", "0.2,0.5,1"], Some(dir.path()), None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("heattrace.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,trace0,trace1,supertrace"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert!((r[1] - r[2] - r[3]).abs() < 1e-12);
        assert!((r[3] - 1.0).abs() < 1e-2, "{r:?}");
    }
}

#[test]
fn couple_sets_coupling_from_time() {
    let o = whl(&["spectrum", "--poly", "x^2/2", "--t", "0.25", "--couple", "--count", "3"], None, None);
    assert_eq!(code(&o), 0);
    let m: Manifest = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(m.result["T"], 2.0);
    // levels scale with T: 2kT in the upper sector
    assert!((m.result["degree1"][0].as_f64().unwrap() - 4.0).abs() < 1e-4);
}

#[test]
fn remaining_subcommands_succeed() {
    for args in [
        vec!["pardist", "--poly", "x^2/2", "--t", "1", "--x", "0", "--y", "1"],
        vec!["pardist", "--poly", "x^3/3", "--count", "4"],
        vec!["agmon", "--poly", "x^4/4"],
        vec!["agmon", "--poly", "x1^2/2 + x2^4/4", "--x", "0,0", "--y", "1,-1"],
        vec!["tameness", "--poly", "x^2/2"],
        vec!["tameness", "--poly", "z1^3 + z2^3", "--mc-samples", "50000"],
        vec!["compare", "--poly", "x^2/2", "--t", "0.1,0.2"],
        vec!["probe", "--poly", "x^2/2", "--order", "2", "--count", "8"],
        vec!["index", "--poly", "z^3", "--field", "complex"],
    ] {
        let o = whl(&args, None, None);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        let m: Manifest = serde_json::from_slice(&o.stdout).unwrap();
        assert!(m.checks.iter().all(|c| c.passed), "{args:?}");
    }
}
