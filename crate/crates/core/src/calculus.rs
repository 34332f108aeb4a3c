//! Gradient, Hessian, the potential `V = |∇f|²` and segment restriction.

use crate::parse::AnyPoly;
use crate::poly::{Coeff, MultiPoly, Rational};

pub fn grad<C: Coeff>(f: &MultiPoly<C>) -> Vec<MultiPoly<C>> {
    (0..f.nvars()).map(|i| f.derivative(i)).collect()
}

/// Symmetric matrix of second partials, row-major.
pub fn hessian<C: Coeff>(f: &MultiPoly<C>) -> Vec<Vec<MultiPoly<C>>> {
    let g = grad(f);
    let n = f.nvars();
    let mut h = vec![vec![MultiPoly::zero(n); n]; n];
    for i in 0..n {
        for j in i..n {
            let d = g[i].derivative(j);
            h[j][i] = d.clone();
            h[i][j] = d;
        }
    }
    h
}

/// `Σ (∂f/∂xᵢ)²` for real f.
pub fn potential_v_real(f: &MultiPoly<Rational>) -> MultiPoly<Rational> {
    grad(f)
        .iter()
        .fold(MultiPoly::zero(f.nvars()), |acc, g| &acc + &(g * g))
}

/// `Σ |∂W/∂zⱼ|²` as a real polynomial in `(u1, v1, u2, v2, ...)`, `zⱼ = uⱼ + i vⱼ`.
pub fn potential_v_complex(w: &MultiPoly<crate::poly::ComplexRational>) -> MultiPoly<Rational> {
    let n2 = 2 * w.nvars();
    grad(w).iter().fold(MultiPoly::zero(n2), |acc, g| {
        let (re, im) = g.realify();
        &acc + &(&(&re * &re) + &(&im * &im))
    })
}

pub fn potential_v(f: &AnyPoly) -> MultiPoly<Rational> {
    match f {
        AnyPoly::Real(p) => potential_v_real(p),
        AnyPoly::Complex(p) => potential_v_complex(p),
    }
}

/// `P(x0 + u (x1 - x0))` as a univariate polynomial in `u`.
pub fn segment_restrict(p: &MultiPoly<Rational>, x0: &[Rational], x1: &[Rational]) -> MultiPoly<Rational> {
    assert_eq!(x0.len(), p.nvars());
    assert_eq!(x1.len(), p.nvars());
    let u = MultiPoly::var(1, 0);
    let subs: Vec<_> = x0
        .iter()
        .zip(x1)
        .map(|(a, b)| &MultiPoly::constant(1, a.clone()) + &u.scale(&(b - a)))
        .collect();
    p.substitute(&subs)
}

/// Integral of a univariate polynomial over `[0, 1]`.
pub fn integrate_unit(p: &MultiPoly<Rational>) -> Rational {
    assert_eq!(p.nvars(), 1);
    p.terms()
        .map(|(e, c)| c / Rational::from_integer((e[0] + 1).into()))
        .sum()
}
