//! Browser bindings: each function takes plain arguments and returns a JSON
//! string, either the result or `{"error": message}`.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;
use whl_core::parametrix::{t_grading, theta_recursion};
use whl_core::parse::{parse_poly, parse_real, AnyPoly, Field};
use whl_core::potential::Potential;
use whl_core::quad::{index_complex, index_real, QuadConfig};
use whl_core::spectral::{eigen_solve, heat_trace, spectrum_for_trace, Grid};

const MAX_ORDER: usize = 6;
const MAX_COUNT: usize = 60;

fn wrap(r: Result<Value, String>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn field_of(name: &str) -> Result<Field, String> {
    match name {
        "real" => Ok(Field::Real),
        "complex" => Ok(Field::Complex),
        other => Err(format!("unknown field `{other}`")),
    }
}

pub fn index_value(poly: &str, nvars: usize, field: &str) -> Result<Value, String> {
    if !(1..=3).contains(&nvars) {
        return Err("use 1 to 3 variables".into());
    }
    let cfg = QuadConfig {
        tol: 1e-6,
        ..QuadConfig::default()
    };
    let (r, n) = match parse_poly(poly, nvars, field_of(field)?).map_err(|e| e.to_string())? {
        AnyPoly::Real(f) => (index_real(&f, &cfg), nvars),
        AnyPoly::Complex(w) => {
            if nvars > 1 {
                return Err("complex integrals in the browser are limited to one variable".into());
            }
            (index_complex(&w, &cfg), nvars)
        }
    };
    let r = r.map_err(|e| e.to_string())?;
    Ok(json!({
        "value": r.value,
        "error": r.error_estimate,
        "rounded": r.rounded,
        "residual": r.residual,
        "nvars": n,
    }))
}

pub fn spectrum_value(poly: &str, coupling: f64, count: usize) -> Result<Value, String> {
    if !(coupling > 0.0 && coupling <= 10.0) {
        return Err("coupling must be in (0, 10]".into());
    }
    if !(1..=MAX_COUNT).contains(&count) {
        return Err(format!("count must be in 1..={MAX_COUNT}"));
    }
    let pot = Potential::new(&parse_real(poly, 1).map_err(|e| e.to_string())?);
    let err = |e: whl_core::Error| e.to_string();
    let grid = Grid::auto(&pot, coupling, 120.0, 0.02).map_err(err)?;
    let s0 = eigen_solve(&pot, coupling, &grid, 0, count).map_err(err)?;
    let s1 = eigen_solve(&pot, coupling, &grid, 1, count).map_err(err)?;
    let ground: Vec<[f64; 2]> = s0.eigenvectors[0]
        .iter()
        .enumerate()
        .step_by(4)
        .map(|(i, v)| [grid.node(i), *v])
        .collect();
    let tol = 1e-8;
    let t_min = 0.2;
    let trace_grid = Grid::auto(&pot, coupling, ((1.0f64 / tol).ln() + 10.0) / t_min + 25.0, 0.02).map_err(err)?;
    let a = spectrum_for_trace(&pot, coupling, &trace_grid, 0, t_min, tol, false).map_err(err)?;
    let b = spectrum_for_trace(&pot, coupling, &trace_grid, 1, t_min, tol, false).map_err(err)?;
    let traces = (1..=10)
        .map(|k| heat_trace(&a, &b, 0.2 * k as f64, tol).map_err(err))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(json!({
        "degree0": s0.eigenvalues,
        "degree1": s1.eigenvalues,
        "ground_state": ground,
        "traces": traces,
        "grid": grid,
    }))
}

pub fn theta_value(poly: &str, nvars: usize, order: usize) -> Result<Value, String> {
    if !(1..=2).contains(&nvars) {
        return Err("use 1 or 2 variables".into());
    }
    if order > MAX_ORDER {
        return Err(format!("order at most {MAX_ORDER}"));
    }
    let f = parse_real(poly, nvars).map_err(|e| e.to_string())?;
    let tab = theta_recursion(&f, order);
    let grading = t_grading(&tab);
    Ok(json!({
        "ok": grading.ok(),
        "grading": grading,
        "theta": tab.to_doc(),
    }))
}

/// Index integral; `field` is `"real"` or `"complex"`.
#[wasm_bindgen]
pub fn index(poly: &str, nvars: usize, field: &str) -> String {
    wrap(index_value(poly, nvars, field))
}

/// Eigenvalues of both form degrees, the ground state and heat traces.
#[wasm_bindgen]
pub fn spectrum(poly: &str, coupling: f64, count: usize) -> String {
    wrap(spectrum_value(poly, coupling, count))
}

/// Parametrix coefficients with the T-degree report.
#[wasm_bindgen]
pub fn theta(poly: &str, nvars: usize, order: usize) -> String {
    wrap(theta_value(poly, nvars, order))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn index_of_quadratic() {
        let v = parse(&index("x^2/2", 1, "real"));
        assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-6);
        let v = parse(&index("z^4", 1, "complex"));
        assert_eq!(v["rounded"], 3);
    }

    #[test]
    fn oscillator_spectrum_and_supertrace() {
        let v = parse(&spectrum("x^2/2", 1.0, 5));
        let e1: Vec<f64> = serde_json::from_value(v["degree1"].clone()).unwrap();
        for (k, l) in e1.iter().enumerate() {
            assert!((l - 2.0 * (k + 1) as f64).abs() < 2e-3, "{k}: {l}");
        }
        for t in v["traces"].as_array().unwrap() {
            assert!((t["supertrace"].as_f64().unwrap() - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn theta_grading() {
        let v = parse(&theta("x1^3/3", 1, 3));
        assert_eq!(v["ok"], true);
    }

    #[test]
    fn errors_are_json() {
        for s in [
            index("x^", 1, "real"),
            index("x^2", 1, "quaternion"),
            index("x^2", 9, "real"),
            spectrum("x^2", -1.0, 5),
            spectrum("x^2", 1.0, 0),
            spectrum("x", 1.0, 3),
            theta("x^2", 1, 99),
        ] {
            assert!(parse(&s)["error"].is_string(), "{s}");
        }
    }
}
