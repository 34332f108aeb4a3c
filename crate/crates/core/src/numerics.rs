//! Small numeric helpers shared across modules.

/// Central-difference derivative of a vector-valued function refined by a
/// Richardson table over `levels` halvings of `h0`.
pub fn richardson_derivative<F>(f: F, t: f64, h0: f64, levels: usize) -> Vec<f64>
where
    F: Fn(f64) -> Vec<f64>,
{
    let rows: Vec<Vec<f64>> = (0..levels.max(1))
        .map(|k| {
            let h = h0 / f64::powi(2.0, k as i32);
            let (a, b) = (f(t + h), f(t - h));
            a.iter().zip(&b).map(|(p, m)| (p - m) / (2.0 * h)).collect()
        })
        .collect();
    (0..rows[0].len())
        .map(|i| richardson_extrapolate(&rows.iter().map(|r| r[i]).collect::<Vec<_>>()))
        .collect()
}

/// Extrapolates values computed at spacings `h, h/2, h/4, ...` assuming an
/// even error expansion `c₁h² + c₂h⁴ + ...`.
pub fn richardson_extrapolate(values: &[f64]) -> f64 {
    let mut cur = values.to_vec();
    let mut factor = 4.0;
    while cur.len() > 1 {
        cur = cur
            .windows(2)
            .map(|w| (factor * w[1] - w[0]) / (factor - 1.0))
            .collect();
        factor *= 4.0;
    }
    cur[0]
}

/// Least-squares line `y = a + b x`; returns `(a, b)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    Some((my - b * mx, b))
}

/// Fit of `y = C x^p` on positive data; returns `(C, p)`.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let (lx, ly): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    linear_fit(&lx, &ly).map(|(a, b)| (a.exp(), b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_exp() {
        let d = richardson_derivative(|t| vec![t.exp(), (2.0 * t).sin()], 0.3, 0.1, 4);
        assert!((d[0] - 0.3f64.exp()).abs() < 1e-12);
        assert!((d[1] - 2.0 * 0.6f64.cos()).abs() < 1e-11);
    }

    #[test]
    fn extrapolation_removes_quadratic_error() {
        let vals: Vec<f64> = [0.1f64, 0.05, 0.025].iter().map(|h| 1.0 + 3.0 * h * h + h.powi(4)).collect();
        assert!((richardson_extrapolate(&vals) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn power_fit() {
        let x: Vec<f64> = (1..10).map(|k| k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(1.5)).collect();
        let (c, p) = loglog_fit(&x, &y).unwrap();
        assert!((c - 3.0).abs() < 1e-12 && (p - 1.5).abs() < 1e-12);
    }
}
