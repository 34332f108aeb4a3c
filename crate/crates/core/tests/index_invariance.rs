use whl_core::parse::{parse_complex, parse_real};
use whl_core::quad::{index_complex, index_real, QuadConfig};

// rotation by the rational orthogonal matrix [[3/5, -4/5], [4/5, 3/5]]
const U: &str = "(3*x1 - 4*x2)/5";
const V: &str = "(4*x1 + 3*x2)/5";

fn rotated(template: &str) -> String {
    template.replace('u', &format!("({U})")).replace('v', &format!("({V})"))
}

#[test]
fn real_index_is_rotation_invariant() {
    let cfg = QuadConfig {
        tol: 1e-6,
        ..QuadConfig::default()
    };
    for (template, want) in [
        ("u^2/2 + v^2/2", 1.0),
        ("u^4/4 + v^2/2", 1.0),
        ("u^3/3 + v^2/2", 0.0),
        ("u^2/2 - v^2/2 + u*v/3", -1.0),
    ] {
        let plain = parse_real(&template.replace('u', "x1").replace('v', "x2"), 2).unwrap();
        let turned = parse_real(&rotated(template), 2).unwrap();
        let a = index_real(&plain, &cfg).unwrap();
        let b = index_real(&turned, &cfg).unwrap();
        assert!((a.value - b.value).abs() < 1e-5, "{template}: {} vs {}", a.value, b.value);
        assert!((a.value - want).abs() < 1e-4, "{template}: {}", a.value);
    }
}

#[test]
fn complex_index_is_unitary_invariant() {
    let cfg = QuadConfig::monte_carlo(400_000, 3, 1.0);
    let plain = parse_complex("z1^2 + z2^2", 2).unwrap();
    let turned = parse_complex("((3*z1 - 4*z2)/5)^2 + ((4*z1 + 3*z2)/5)^2", 2).unwrap();
    // a real rotation preserves z1² + z2² exactly
    assert_eq!(plain, turned);
    let w = parse_complex("((3*z1 - 4*z2)/5)^3 + ((4*z1 + 3*z2)/5)^2", 2).unwrap();
    let r = index_complex(&w, &cfg).unwrap();
    assert!((r.value - 2.0).abs() < 5.0 * r.error_estimate + 1e-2, "{} +- {}", r.value, r.error_estimate);
}
