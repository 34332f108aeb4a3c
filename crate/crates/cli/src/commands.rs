use serde_json::{json, Value};
use whl_core::action::{
    action, agmon_distance, agmon_length, bound_suite, minimize_action, random_queries, ActionOptions, PathDisc,
};
use whl_core::numerics::loglog_fit;
use whl_core::parametrix::{bound_probe, pde_defect_check, t_grading, theta_recursion};
use whl_core::parse::{parse_complex, parse_poly, parse_real, AnyPoly};
use whl_core::poly::{format_rational, rational_to_f64, ComplexRational, MultiPoly, Rational};
use whl_core::potential::Potential;
use whl_core::quad::{
    alpha_probe, fjr_probe, homogeneous_exponents, index_complex, index_real, index_real_via_density,
    real_trace_exponent, IndexResult, QuadConfig,
};
use whl_core::spectral::{
    agmon_decay_check, duhamel_probe, eigen_solve, eigenvalues_richardson, expansion_compare, heat_trace,
    spectrum_for_trace, susy_pairing, weyl_fit, DuhamelOptions, Grid, SpectrumResult,
};
use whl_core::weights::{nondegeneracy_screen, quasi_weights, WeightData};
use whl_core::Error;

use crate::config::{Command, FieldArg, RunConfig};
use crate::{Check, CliError, Outcome, Table};

const MAX_THETA_ORDER: usize = 8;
const MAX_THETA_VARS: usize = 3;
const GRID_SPACING: f64 = 0.01;

pub fn dispatch(cfg: &RunConfig) -> Result<Outcome, CliError> {
    match cfg.command {
        Command::Index => index(cfg),
        Command::Milnor => milnor(cfg),
        Command::Theta => theta(cfg),
        Command::Pardist => pardist(cfg),
        Command::Agmon => agmon(cfg),
        Command::Spectrum => spectrum(cfg),
        Command::Heattrace => heattrace(cfg),
        Command::Tameness => tameness(cfg),
        Command::Compare => compare(cfg),
        Command::Probe => probe(cfg),
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

fn real_poly(cfg: &RunConfig) -> Result<MultiPoly<Rational>, CliError> {
    if cfg.field != FieldArg::Real {
        return usage(format!("`{}` needs a real polynomial", cfg.command.name()));
    }
    Ok(parse_real(&cfg.poly, cfg.nvars)?)
}

fn complex_poly(cfg: &RunConfig) -> Result<MultiPoly<ComplexRational>, CliError> {
    if cfg.field != FieldArg::Complex {
        return usage(format!("`{}` needs a complex polynomial", cfg.command.name()));
    }
    Ok(parse_complex(&cfg.poly, cfg.nvars)?)
}

fn line_poly(cfg: &RunConfig) -> Result<MultiPoly<Rational>, CliError> {
    let f = real_poly(cfg)?;
    if cfg.nvars != 1 {
        return usage(format!("`{}` works on a line: use one variable", cfg.command.name()));
    }
    Ok(f)
}

fn quad_config(cfg: &RunConfig, default_tol: f64) -> QuadConfig {
    match cfg.mc_samples {
        Some(s) => QuadConfig::monte_carlo(s, cfg.seed, cfg.tol.unwrap_or(5e-2)),
        None => QuadConfig {
            tol: cfg.tol.unwrap_or(default_tol),
            seed: cfg.seed,
            ..QuadConfig::default()
        },
    }
}

fn index_json(r: &IndexResult) -> Value {
    json!({
        "value": r.value,
        "error": r.error_estimate,
        "rounded": r.rounded,
        "residual": r.residual,
        "method": r.method,
        "radius": r.radius,
        "evaluations": r.evaluations,
    })
}

fn integer_check(r: &IndexResult) -> Check {
    Check::new(
        "near-integer",
        r.rounded.is_some(),
        r.residual,
        0.1,
        format!("value {} +- {:.1e}", r.value, r.error_estimate),
    )
}

fn sign(n: usize) -> f64 {
    if n.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn index(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let qc = quad_config(cfg, 1e-8);
    let mut checks = Vec::new();
    let result = match parse_poly(&cfg.poly, cfg.nvars, cfg.field.core())? {
        AnyPoly::Real(f) => {
            let r = index_real(&f, &qc)?;
            checks.push(integer_check(&r));
            let mut v = index_json(&r);
            if cfg.mc_samples.is_none() && cfg.nvars <= 2 {
                let d = index_real_via_density(&f, &qc)?;
                let gap = (d.value - r.value).abs();
                let tol = 10.0 * (r.error_estimate + d.error_estimate) + 1e-9;
                checks.push(Check::at_most("density-agreement", gap, tol));
                v["density_value"] = json!(d.value);
            }
            v["field"] = json!("real");
            v
        }
        AnyPoly::Complex(w) => {
            let r = index_complex(&w, &qc)?;
            checks.push(integer_check(&r));
            let mut v = index_json(&r);
            v["field"] = json!("complex");
            v["chi"] = json!(sign(cfg.nvars) * r.value);
            v
        }
    };
    Ok(Outcome {
        result,
        checks,
        tables: Vec::new(),
    })
}

fn mu_json(w: &WeightData) -> Value {
    match w.milnor_integer().and_then(|m| m.to_string().parse::<i64>().ok()) {
        Some(m) => json!(m),
        None => json!(format_rational(&w.milnor)),
    }
}

fn milnor(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let w = complex_poly(cfg)?;
    let weights = quasi_weights(&w)?;
    let screen = nondegeneracy_screen(&AnyPoly::Complex(w.clone()), Some(&weights));
    let qc = if cfg.mc_samples.is_none() && cfg.nvars > 1 {
        QuadConfig::monte_carlo(2_000_000, cfg.seed, cfg.tol.unwrap_or(5e-2))
    } else {
        quad_config(cfg, 1e-6)
    };
    let r = index_complex(&w, &qc)?;
    let mu = rational_to_f64(&weights.milnor);
    let summary = weights.summary();
    let gap = (r.value - mu).abs();
    let checks = vec![
        Check::at_most("integral-matches-mu", gap, (5.0 * r.error_estimate).max(1e-3)),
        Check::new("nondegenerate", screen.all_pass(), screen.sphere_min_grad, screen.sphere_threshold, ""),
    ];
    Ok(Outcome {
        result: json!({
            "weights": summary.weights,
            "kappa": summary.kappa,
            "mu": mu_json(&weights),
            "integral": r.value,
            "error": r.error_estimate,
            "rounded": r.rounded,
            "residual": r.residual,
            "chi": sign(cfg.nvars) * r.value,
            "method": r.method,
            "nondegeneracy": screen,
        }),
        checks,
        tables: Vec::new(),
    })
}

fn theta(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let f = real_poly(cfg)?;
    let order = cfg.order.unwrap_or(3);
    if order > MAX_THETA_ORDER {
        return usage(format!("--order at most {MAX_THETA_ORDER}"));
    }
    if cfg.nvars > MAX_THETA_VARS {
        return usage(format!("theta supports at most {MAX_THETA_VARS} variables"));
    }
    let tab = theta_recursion(&f, order);
    let e0 = tab.e0_identity_residual().is_zero();
    let mut checks = vec![Check::new("e0-identity", e0, 0.0, 0.0, "")];
    let grading = cfg.check_grading.then(|| t_grading(&tab));
    if let Some(g) = &grading {
        checks.push(Check::new(
            "t-grading",
            g.ok(),
            g.violations.len() as f64,
            0.0,
            format!("{} coefficients above the degree bound", g.violations.len()),
        ));
    }
    Ok(Outcome {
        result: json!({ "order": order, "grading": grading, "theta": tab.to_doc() }),
        checks,
        tables: Vec::new(),
    })
}

fn action_options(cfg: &RunConfig) -> ActionOptions {
    ActionOptions {
        seed: cfg.seed,
        ..ActionOptions::default()
    }
}

fn kappa_of(f: &MultiPoly<Rational>) -> f64 {
    quasi_weights(f).map(|w| rational_to_f64(&w.kappa)).unwrap_or(0.0)
}

fn pardist(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let f = real_poly(cfg)?;
    let pot = Potential::new(&f);
    let opts = action_options(cfg);
    if let (Some(x), Some(y)) = (&cfg.x, &cfg.y) {
        let ts = if cfg.t.is_empty() { vec![1.0] } else { cfg.t.clone() };
        let mut rows = Vec::new();
        let mut worst_straight = f64::NEG_INFINITY;
        let mut worst_agmon = f64::INFINITY;
        for &t in &ts {
            let coupling = cfg.coupling_at(t);
            let r = minimize_action(&pot, coupling, t, x, y, opts)?;
            let straight = action(&PathDisc::straight(x, y, t, opts.segments), &pot, coupling);
            let agmon = coupling * agmon_length(&r.path, &pot, 0.0);
            worst_straight = worst_straight.max(r.value - straight);
            worst_agmon = worst_agmon.min(r.value - agmon);
            rows.push(json!({
                "t": t,
                "T": coupling,
                "value": r.value,
                "straight_action": straight,
                "agmon_length": agmon,
                "iterations": r.iterations,
                "converged": r.converged,
            }));
        }
        return Ok(Outcome {
            result: json!({ "x": x, "y": y, "queries": rows }),
            checks: vec![
                Check::at_most("below-straight-line", worst_straight, 0.0),
                Check::new("action-above-agmon", worst_agmon >= 0.0, worst_agmon, 0.0, ""),
            ],
            tables: Vec::new(),
        });
    }
    if cfg.x.is_some() || cfg.y.is_some() {
        return usage("pass both --x and --y, or neither for random queries");
    }
    if cfg.couple && cfg.t.len() != 1 {
        return usage("--couple with random queries needs a single --t");
    }
    let count = cfg.count.unwrap_or(10);
    let range = match cfg.t.len() {
        0 => (0.1, 1.0),
        1 => (cfg.t[0], cfg.t[0]),
        _ => (
            cfg.t.iter().cloned().fold(f64::INFINITY, f64::min),
            cfg.t.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        ),
    };
    let mut queries = random_queries(cfg.nvars, count, (0.0, 1.0), 1.5, cfg.seed);
    for q in &mut queries {
        q.t = range.0 + q.t * (range.1 - range.0);
    }
    let coupling = cfg.coupling_at(range.0);
    let symmetry_tol = 1e-4;
    let rep = bound_suite(&pot, coupling, &queries, kappa_of(&f), symmetry_tol, opts)?;
    let failing = |p: fn(&whl_core::action::SampleVerdict) -> bool| rep.samples.iter().filter(|s| !p(s)).count() as f64;
    let max_gap = rep.samples.iter().map(|s| s.symmetry_gap).fold(0.0, f64::max);
    let checks = vec![
        Check::at_most("symmetry", max_gap, symmetry_tol),
        Check::at_most("below-straight-line", failing(|s| s.below_straight), 0.0),
        Check::at_most("action-above-agmon", failing(|s| s.agmon_ok), 0.0),
        Check::at_most("seeded-triangle", failing(|s| s.triangle_ok), 0.0),
    ];
    Ok(Outcome {
        result: serde_json::to_value(&rep)?,
        checks,
        tables: Vec::new(),
    })
}

fn agmon(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let f = real_poly(cfg)?;
    let pot = Potential::new(&f);
    let lambda = cfg.lambda.first().copied().unwrap_or(0.0);
    let coupling = cfg.coupling_at(cfg.t.first().copied().unwrap_or(1.0));
    if cfg.nvars == 1 && coupling <= 0.0 {
        return usage("eigenfunction decay needs a positive coupling --T");
    }
    let mut result = serde_json::Map::new();
    let mut checks = Vec::new();
    match (&cfg.x, &cfg.y) {
        (Some(x), Some(y)) => {
            let r = agmon_distance(&pot, lambda, x, y, action_options(cfg))?;
            let straight = agmon_length(&PathDisc::straight(x, y, 1.0, r.path.segments()), &pot, lambda);
            checks.push(Check::at_most("below-straight-line", r.value - straight, 0.0));
            result.insert(
                "distance".into(),
                json!({
                    "lambda": lambda,
                    "value": r.value,
                    "scaled_value": coupling * r.value,
                    "straight_length": straight,
                    "converged": r.converged,
                    "iterations": r.iterations,
                }),
            );
        }
        (None, None) if cfg.nvars > 1 => {
            return usage("agmon in several variables needs --x and --y");
        }
        (None, None) => {}
        _ => return usage("pass both --x and --y"),
    }
    if cfg.nvars == 1 {
        let grid = match cfg.grid {
            Some(g) => Grid::new(g.half_width, g.points)?,
            None => Grid::auto(&pot, coupling, 60.0, GRID_SPACING)?,
        };
        let mut decay = Vec::new();
        for degree in 0..2 {
            let s = eigen_solve(&pot, coupling, &grid, degree, 1)?;
            let r = agmon_decay_check(&pot, &s, 0, 0.9)?;
            checks.push(Check::new(
                &format!("decay-degree-{degree}"),
                r.interior && r.sup.is_finite(),
                r.sup,
                f64::INFINITY,
                format!("maximum at x = {}", r.argmax),
            ));
            decay.push(json!({ "degree": degree, "report": r }));
        }
        result.insert("grid".into(), serde_json::to_value(grid)?);
        result.insert("decay".into(), Value::Array(decay));
    }
    Ok(Outcome {
        result: Value::Object(result),
        checks,
        tables: Vec::new(),
    })
}

fn sector(degree: usize, coupling: f64, grid: Grid, eigenvalues: Vec<f64>) -> SpectrumResult {
    SpectrumResult {
        degree,
        coupling,
        grid,
        eigenvalues,
        eigenvectors: Vec::new(),
    }
}

fn spectrum_table(file: &str, values: &[f64]) -> Table {
    Table {
        file: file.into(),
        header: vec!["k", "lambda"],
        rows: values.iter().enumerate().map(|(k, l)| vec![k as f64, *l]).collect(),
    }
}

fn spectrum(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let pot = Potential::new(&line_poly(cfg)?);
    let coupling = cfg.coupling_at(cfg.t.first().copied().unwrap_or(1.0));
    let count = cfg.count.unwrap_or(20);
    let solve = |grid: &Grid| -> Result<[Vec<f64>; 2], CliError> {
        if count > grid.interior() / 4 {
            return usage(format!("--count {count} too large for a grid with {} nodes", grid.points));
        }
        Ok([
            eigenvalues_richardson(&pot, coupling, grid, 0, count)?,
            eigenvalues_richardson(&pot, coupling, grid, 1, count)?,
        ])
    };
    let (grid, values) = match cfg.grid {
        Some(g) => {
            let grid = Grid::new(g.half_width, g.points)?;
            (grid, solve(&grid)?)
        }
        None => {
            let mut ceiling = 100.0;
            loop {
                let grid = Grid::auto(&pot, coupling, ceiling, GRID_SPACING)?;
                let v = solve(&grid)?;
                let top = v[0].last().copied().unwrap_or(0.0).max(v[1].last().copied().unwrap_or(0.0));
                if top + 25.0 <= ceiling {
                    break (grid, v);
                }
                ceiling = 2.0 * (top + 25.0);
                if ceiling > 1e6 {
                    return usage("requested eigenvalues exceed the supported range");
                }
            }
        }
    };
    let [e0, e1] = values;
    let mut checks = Vec::new();
    let pairs = (count - 1).min(10);
    let pairing = if pairs >= 1 {
        let s0 = sector(0, coupling, grid, e0.clone());
        let s1 = sector(1, coupling, grid, e1.clone());
        let gap = susy_pairing(&s0, &s1, pairs, 1e-6)?;
        checks.push(Check::at_most("susy-pairing", gap, 1e-3));
        Some(gap)
    } else {
        None
    };
    Ok(Outcome {
        result: json!({
            "T": coupling,
            "grid": grid,
            "richardson": true,
            "degree0": e0,
            "degree1": e1,
            "susy_pairing_gap": pairing,
        }),
        checks,
        tables: vec![spectrum_table("spectrum0.csv", &e0), spectrum_table("spectrum1.csv", &e1)],
    })
}

fn trace_grid(cfg: &RunConfig, pot: &Potential, coupling: f64, t_min: f64, tol: f64) -> Result<Grid, CliError> {
    Ok(match cfg.grid {
        Some(g) => Grid::new(g.half_width, g.points)?,
        None => Grid::auto(pot, coupling, ((1.0 / tol).ln() + 10.0) / t_min + 25.0, GRID_SPACING)?,
    })
}

fn heattrace(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let pot = Potential::new(&line_poly(cfg)?);
    let ts = if cfg.t.is_empty() { vec![0.2, 0.4, 0.6, 0.8, 1.0] } else { cfg.t.clone() };
    let tol = cfg.tol.unwrap_or(1e-10);
    let t_min = ts.iter().cloned().fold(f64::INFINITY, f64::min);
    let sectors = |coupling: f64, t_min: f64| -> Result<(SpectrumResult, SpectrumResult), CliError> {
        let grid = trace_grid(cfg, &pot, coupling, t_min, tol)?;
        Ok((
            spectrum_for_trace(&pot, coupling, &grid, 0, t_min, tol, false)?,
            spectrum_for_trace(&pot, coupling, &grid, 1, t_min, tol, false)?,
        ))
    };
    let shared = if cfg.couple { None } else { Some(sectors(cfg.coupling_at(t_min), t_min)?) };
    let mut rows = Vec::new();
    for &t in &ts {
        let row = match &shared {
            Some((s0, s1)) => heat_trace(s0, s1, t, tol)?,
            None => {
                let (s0, s1) = sectors(cfg.coupling_at(t), t)?;
                heat_trace(&s0, &s1, t, tol)?
            }
        };
        rows.push(row);
    }
    let st: Vec<f64> = rows.iter().map(|r| r.supertrace).collect();
    let lo = st.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = st.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean = st.iter().sum::<f64>() / st.len() as f64;
    let off = st.iter().map(|s| (s - mean.round()).abs()).fold(0.0, f64::max);
    let checks = vec![
        Check::at_most("supertrace-constant", hi - lo, 1e-2),
        Check::at_most("supertrace-integer", off, 1e-2),
    ];
    let table = Table {
        file: "heattrace.csv".into(),
        header: vec!["t", "trace0", "trace1", "supertrace"],
        rows: rows.iter().map(|r| vec![r.t, r.trace0, r.trace1, r.supertrace]).collect(),
    };
    Ok(Outcome {
        result: json!({ "traces": rows, "index": mean.round(), "supertrace_spread": hi - lo }),
        checks,
        tables: vec![table],
    })
}

fn tameness(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let poly = parse_poly(&cfg.poly, cfg.nvars, cfg.field.core())?;
    let weights = match &poly {
        AnyPoly::Real(f) => quasi_weights(f),
        AnyPoly::Complex(w) => quasi_weights(w),
    };
    let weights = match weights {
        Ok(w) => Some(w),
        Err(Error::NotQuasiHomogeneous | Error::WeightsNotUnique) => None,
        Err(e) => return Err(e.into()),
    };
    let screen = nondegeneracy_screen(&poly, weights.as_ref());
    let lambdas = if cfg.lambda.is_empty() { vec![1.0, 2.0, 4.0, 8.0, 16.0] } else { cfg.lambda.clone() };
    let mc = QuadConfig::monte_carlo(cfg.mc_samples.unwrap_or(200_000), cfg.seed, 1.0);
    let alpha = alpha_probe(&poly, &lambdas, &mc)?;
    let mut result = json!({
        "weights": weights.as_ref().map(|w| w.summary()),
        "nondegeneracy": screen,
        "alpha": alpha,
    });
    if let Some(w) = weights.as_ref().filter(|w| w.is_homogeneous()) {
        result["exponents"] = serde_json::to_value(homogeneous_exponents(w, cfg.order.unwrap_or(3) as u32)?)?;
        if cfg.field == FieldArg::Real {
            result["trace_exponent"] = json!(format_rational(&real_trace_exponent(w)?));
        }
    }
    if let (AnyPoly::Complex(w), Some(wd)) = (&poly, &weights) {
        if wd.gammas.is_some() {
            result["fjr"] = serde_json::to_value(fjr_probe(w, wd, &mc)?)?;
        }
    }
    if let AnyPoly::Real(f) = &poly {
        if cfg.nvars == 1 {
            let pot = Potential::new(f);
            let coupling = cfg.coupling_at(cfg.t.first().copied().unwrap_or(1.0));
            let grid = Grid::auto(&pot, coupling, 400.0, GRID_SPACING)?;
            let s = eigen_solve(&pot, coupling, &grid, 0, 40)?;
            let (constant, exponent) = weyl_fit(&s, (5, 40))?;
            result["eigenvalue_growth"] = json!({ "constant": constant, "exponent": exponent, "band": [5, 40] });
        }
    }
    let checks = vec![
        Check::new("nondegenerate", screen.all_pass(), screen.sphere_min_grad, screen.sphere_threshold, ""),
        Check::new(
            "alpha-admissible",
            alpha.admissible,
            alpha.alpha,
            0.5 * poly_real_dim(&poly) as f64 - 0.1,
            "",
        ),
    ];
    Ok(Outcome {
        result,
        checks,
        tables: Vec::new(),
    })
}

fn poly_real_dim(p: &AnyPoly) -> usize {
    match p {
        AnyPoly::Real(f) => f.nvars(),
        AnyPoly::Complex(w) => 2 * w.nvars(),
    }
}

fn compare(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let f = line_poly(cfg)?;
    let order = cfg.order.unwrap_or(2);
    if order > MAX_THETA_ORDER {
        return usage(format!("--order at most {MAX_THETA_ORDER}"));
    }
    let ts = if cfg.t.is_empty() { vec![0.1, 0.2, 0.4] } else { cfg.t.clone() };
    let x0 = cfg.x.as_ref().map(|x| x[0]).unwrap_or(0.0);
    let rows = expansion_compare(&f, x0, order, &ts, GRID_SPACING)?;
    let (td, tdiff): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.difference > 0.0)
        .map(|r| (r.t, r.difference))
        .unzip();
    let slope = if td.len() >= 2 { loglog_fit(&td, &tdiff).map(|(_, s)| s) } else { None };
    let pairs: Vec<(f64, f64)> = match (&cfg.x, &cfg.y) {
        (Some(x), Some(y)) => vec![(x[0], y[0])],
        _ => vec![(0.0, 0.0), (0.0, 0.3), (-0.5, 0.5), (0.7, 0.4)],
    };
    let t = ts[0];
    let coupling = cfg.coupling_at(t);
    let d = duhamel_probe(&f, order, coupling, t, &pairs, 0.02, DuhamelOptions::default())?;
    let checks = vec![Check::new(
        "duhamel-improves",
        d.corrected_error < d.parametrix_error,
        d.corrected_error,
        d.parametrix_error,
        "",
    )];
    Ok(Outcome {
        result: json!({
            "order": order,
            "x": x0,
            "expansion": rows,
            "difference_slope": slope,
            "duhamel": d,
        }),
        checks,
        tables: Vec::new(),
    })
}

fn probe(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let f = real_poly(cfg)?;
    if cfg.nvars > MAX_THETA_VARS {
        return usage(format!("probe supports at most {MAX_THETA_VARS} variables"));
    }
    let order = cfg.order.unwrap_or(3);
    if order > MAX_THETA_ORDER {
        return usage(format!("--order at most {MAX_THETA_ORDER}"));
    }
    let tab = theta_recursion(&f, order);
    let ct = tab.compile();
    let queries = random_queries(cfg.nvars, cfg.count.unwrap_or(20), (0.02, 0.2), 1.0, cfg.seed);
    let mut defects = Vec::new();
    let mut points = Vec::new();
    for q in &queries {
        let coupling = cfg.coupling_at(q.t);
        let r = pde_defect_check(&ct, q.t, coupling, &q.x, &q.y, 5)?;
        defects.push(json!({ "query": q, "T": coupling, "report": r }));
        points.push((q.t, coupling, q.x.clone(), q.y.clone()));
    }
    let worst = defects
        .iter()
        .filter_map(|d| d["report"]["defect"].as_f64())
        .fold(0.0, f64::max);
    let kappa_p = kappa_of(&f);
    let bounds = bound_probe(&ct, kappa_p, &points);
    let finite = bounds.theta_constants.iter().all(|c| c.is_finite())
        && bounds.vexpv_sup.iter().all(|(_, v)| v.is_finite());
    let checks = vec![
        Check::at_most("pde-defect", worst, 1e-4),
        Check::new("finite-constants", finite, f64::NAN, f64::NAN, ""),
    ];
    Ok(Outcome {
        result: json!({
            "order": order,
            "kappa_prime": kappa_p,
            "max_defect": worst,
            "defects": defects,
            "bounds": bounds,
        }),
        checks,
        tables: Vec::new(),
    })
}
