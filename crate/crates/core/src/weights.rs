//! Quasi-homogeneous weights and the exponents derived from them.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::calculus::grad;
use crate::error::{Error, Result};
use crate::parse::AnyPoly;
use crate::poly::{format_rational, qi, rational_to_f64, Coeff, MultiPoly, Rational};

#[derive(Clone, Debug, PartialEq)]
pub struct WeightData {
    pub q: Vec<Rational>,
    pub kappa: Rational,
    /// `None` when some weight equals 1.
    pub gammas: Option<Vec<Rational>>,
    pub delta: Option<Rational>,
    /// `Π (1/qᵢ - 1)`.
    pub milnor: Rational,
}

impl WeightData {
    pub fn from_weights(q: Vec<Rational>) -> Self {
        let one = Rational::one();
        let min_q = q.iter().min().cloned().expect("nonempty weights");
        let kappa = (&one - Rational::from_integer(4.into()) * &min_q).max(Rational::zero());
        let min_comp = q.iter().map(|qi| &one - qi).min().unwrap();
        let (gammas, delta) = if min_comp.is_zero() {
            (None, None)
        } else {
            (
                Some(q.iter().map(|qi| qi / &min_comp).collect()),
                Some(&one / (Rational::from_integer(2.into()) * &min_comp)),
            )
        };
        let milnor = q.iter().map(|qi| qi.recip() - &one).product();
        Self {
            q,
            kappa,
            gammas,
            delta,
            milnor,
        }
    }

    pub fn milnor_integer(&self) -> Option<BigInt> {
        self.milnor.is_integer().then(|| self.milnor.to_integer())
    }

    pub fn is_homogeneous(&self) -> bool {
        self.q.windows(2).all(|w| w[0] == w[1])
    }

    pub fn summary(&self) -> WeightSummary {
        let fmt = |v: &[Rational]| v.iter().map(format_rational).collect();
        WeightSummary {
            weights: fmt(&self.q),
            kappa: format_rational(&self.kappa),
            gammas: self.gammas.as_deref().map(fmt),
            delta: self.delta.as_ref().map(format_rational),
            mu: self
                .milnor_integer()
                .map(|m| m.to_string())
                .unwrap_or_else(|| format_rational(&self.milnor)),
        }
    }
}

/// Rationals rendered as strings, for JSON output.
#[derive(Clone, Debug, Serialize)]
pub struct WeightSummary {
    pub weights: Vec<String>,
    pub kappa: String,
    pub gammas: Option<Vec<String>>,
    pub delta: Option<String>,
    pub mu: String,
}

/// Solves `Σ aᵢ qᵢ = 1` over the support of `f`.
pub fn quasi_weights<C: Coeff>(f: &MultiPoly<C>) -> Result<WeightData> {
    if f.is_constant() {
        return Err(Error::InvalidArgument("polynomial is constant".into()));
    }
    let n = f.nvars();
    let rows: Vec<Vec<Rational>> = f
        .terms()
        .map(|(e, _)| {
            let mut row: Vec<Rational> = e.iter().map(|&a| qi(a as i64)).collect();
            row.push(Rational::one());
            row
        })
        .collect();
    let q = solve_unique(rows, n)?;
    if q.iter().any(|x| !x.is_positive()) {
        return Err(Error::NotQuasiHomogeneous);
    }
    Ok(WeightData::from_weights(q))
}

/// Exact Gauss-Jordan on an augmented `m x (n+1)` system.
fn solve_unique(mut a: Vec<Vec<Rational>>, n: usize) -> Result<Vec<Rational>> {
    let m = a.len();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..n {
        let Some(p) = (row..m).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(row, p);
        let inv = a[row][col].recip();
        for v in a[row].iter_mut() {
            *v = &*v * &inv;
        }
        for r in 0..m {
            if r != row && !a[r][col].is_zero() {
                let factor = a[r][col].clone();
                for c in col..=n {
                    let d = &factor * &a[row][c];
                    a[r][c] = &a[r][c] - d;
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    if a[row..].iter().any(|r| !r[n].is_zero()) {
        return Err(Error::NotQuasiHomogeneous);
    }
    if pivots.len() < n {
        return Err(Error::WeightsNotUnique);
    }
    Ok((0..n).map(|i| a[i][n].clone()).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct NondegeneracyReport {
    /// No monomial `zᵢ zⱼ` with `i != j`.
    pub no_cross_quadratic: bool,
    /// All weights at most 1/2; `None` without weights.
    pub weights_at_most_half: Option<bool>,
    /// Sampled minimum of `|∇f|` on the unit sphere.
    pub sphere_min_grad: f64,
    pub sphere_threshold: f64,
    pub sphere_screen: bool,
}

impl NondegeneracyReport {
    pub fn all_pass(&self) -> bool {
        self.no_cross_quadratic && self.weights_at_most_half.unwrap_or(true) && self.sphere_screen
    }
}

pub const SPHERE_SAMPLES: usize = 20_000;
pub const SPHERE_THRESHOLD: f64 = 1e-2;

pub fn nondegeneracy_screen(f: &AnyPoly, w: Option<&WeightData>) -> NondegeneracyReport {
    let no_cross_quadratic = match f {
        AnyPoly::Real(p) => !has_cross_quadratic(p),
        AnyPoly::Complex(p) => !has_cross_quadratic(p),
    };
    let half = qi(1) / qi(2);
    let weights_at_most_half = w.map(|w| w.q.iter().all(|x| *x <= half));
    let sphere_min_grad = sphere_min_grad(f, SPHERE_SAMPLES, 0x5eed);
    NondegeneracyReport {
        no_cross_quadratic,
        weights_at_most_half,
        sphere_min_grad,
        sphere_threshold: SPHERE_THRESHOLD,
        sphere_screen: sphere_min_grad > SPHERE_THRESHOLD,
    }
}

fn has_cross_quadratic<C: Coeff>(p: &MultiPoly<C>) -> bool {
    p.terms()
        .any(|(e, _)| e.iter().filter(|&&a| a == 1).count() == 2 && e.iter().sum::<u32>() == 2)
}

fn sphere_min_grad(f: &AnyPoly, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match f {
        AnyPoly::Real(p) => {
            let g: Vec<_> = grad(p).iter().map(|d| d.compile()).collect();
            let n = p.nvars();
            let mut best = f64::INFINITY;
            for _ in 0..samples {
                let x = unit_vector(&mut rng, n);
                let norm = g.iter().map(|d| d.eval(&x).powi(2)).sum::<f64>().sqrt();
                best = best.min(norm);
            }
            best
        }
        AnyPoly::Complex(p) => {
            let g: Vec<_> = grad(p).iter().map(|d| d.compile()).collect();
            let n = p.nvars();
            let mut best = f64::INFINITY;
            for _ in 0..samples {
                let x = unit_vector(&mut rng, 2 * n);
                let z: Vec<_> = x
                    .chunks(2)
                    .map(|c| num_complex::Complex64::new(c[0], c[1]))
                    .collect();
                let norm = g.iter().map(|d| d.eval(&z).norm_sqr()).sum::<f64>().sqrt();
                best = best.min(norm);
            }
            best
        }
    }
}

fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 1e-12 {
            return v.into_iter().map(|x| x / r).collect();
        }
    }
}

/// Floating weights, for samplers.
pub fn weights_f64(w: &WeightData) -> Vec<f64> {
    w.q.iter().map(rational_to_f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_complex, parse_poly, parse_real, Field};
    use crate::poly::q;

    #[test]
    fn sum_of_cubes() {
        let w = quasi_weights(&parse_complex("z1^3+z2^3", 2).unwrap()).unwrap();
        assert_eq!(w.q, vec![q(1, 3), q(1, 3)]);
        assert_eq!(w.kappa, qi(0));
        assert_eq!(w.gammas, Some(vec![q(1, 2), q(1, 2)]));
        assert_eq!(w.delta, Some(q(3, 4)));
        assert_eq!(w.milnor_integer(), Some(4.into()));
    }

    #[test]
    fn quintic() {
        let w = quasi_weights(&parse_complex("z1^5", 1).unwrap()).unwrap();
        assert_eq!(w.q, vec![q(1, 5)]);
        assert_eq!(w.kappa, q(1, 5));
        assert_eq!(w.gammas, Some(vec![q(1, 4)]));
        assert_eq!(w.delta, Some(q(5, 8)));
        assert_eq!(w.milnor, qi(4));
    }

    #[test]
    fn cross_term_gets_weights_but_fails_screen() {
        let src = "z1^2+z1*z2";
        let f = parse_poly(src, 2, Field::Complex).unwrap();
        let AnyPoly::Complex(p) = &f else { unreachable!() };
        let w = quasi_weights(p).unwrap();
        assert_eq!(w.q, vec![q(1, 2), q(1, 2)]);
        let rep = nondegeneracy_screen(&f, Some(&w));
        assert!(!rep.no_cross_quadratic);
    }

    #[test]
    fn failures() {
        let under = parse_complex("z1^2*z2", 2).unwrap();
        assert_eq!(quasi_weights(&under), Err(Error::WeightsNotUnique));
        let inconsistent = parse_real("x1^2 + x1^3", 1).unwrap();
        assert_eq!(quasi_weights(&inconsistent), Err(Error::NotQuasiHomogeneous));
        let with_constant = parse_real("x1^2 + 1", 1).unwrap();
        assert_eq!(quasi_weights(&with_constant), Err(Error::NotQuasiHomogeneous));
        let negative = parse_real("x1*x2^2 + x2", 2).unwrap();
        assert_eq!(quasi_weights(&negative), Err(Error::NotQuasiHomogeneous));
    }

    #[test]
    fn screens() {
        let f = parse_poly("z1^3+z2^3", 2, Field::Complex).unwrap();
        let AnyPoly::Complex(p) = &f else { unreachable!() };
        let w = quasi_weights(p).unwrap();
        let rep = nondegeneracy_screen(&f, Some(&w));
        assert!(rep.all_pass(), "{rep:?}");
        let g = parse_poly("z1*z2", 2, Field::Complex).unwrap();
        assert!(!nondegeneracy_screen(&g, None).no_cross_quadratic);
        // x1^2 x2 is critical along the x2 axis
        let h = parse_poly("x1^2*x2", 2, Field::Real).unwrap();
        assert!(!nondegeneracy_screen(&h, None).sphere_screen);
    }

    #[test]
    fn kappa_vanishes_for_large_weights() {
        for (src, n) in [("z1^4", 1), ("z1^3", 1), ("z1^2 + z2^4", 2)] {
            let p = parse_complex(src, n).unwrap();
            let w = quasi_weights(&p).unwrap();
            assert!(w.kappa.is_zero(), "{src}");
        }
    }
}
