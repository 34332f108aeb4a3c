//! Compiled numeric view of a real potential `f` and its derived quantities.

use crate::calculus::{grad, hessian, potential_v_real};
use crate::poly::{ComplexRational, EvalPoly, MultiPoly, Rational};

#[derive(Clone, Debug)]
pub struct Potential {
    n: usize,
    source: MultiPoly<Rational>,
    v_poly: MultiPoly<Rational>,
    f: EvalPoly,
    grad: Vec<EvalPoly>,
    hess: Vec<Vec<EvalPoly>>,
    v: EvalPoly,
    grad_v: Vec<EvalPoly>,
}

impl Potential {
    pub fn new(f: &MultiPoly<Rational>) -> Self {
        let v_poly = potential_v_real(f);
        Self {
            n: f.nvars(),
            source: f.clone(),
            f: f.compile(),
            grad: grad(f).iter().map(|g| g.compile()).collect(),
            hess: hessian(f)
                .iter()
                .map(|row| row.iter().map(|h| h.compile()).collect())
                .collect(),
            v: v_poly.compile(),
            grad_v: grad(&v_poly).iter().map(|g| g.compile()).collect(),
            v_poly,
        }
    }

    /// `Re W` on `ℝ^{2n}`; its `V` equals `|∂W|²`.
    pub fn from_complex(w: &MultiPoly<ComplexRational>) -> Self {
        Self::new(&w.realify().0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn source(&self) -> &MultiPoly<Rational> {
        &self.source
    }

    pub fn v_poly(&self) -> &MultiPoly<Rational> {
        &self.v_poly
    }

    pub fn f(&self, x: &[f64]) -> f64 {
        self.f.eval(x)
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        self.grad.iter().map(|g| g.eval(x)).collect()
    }

    pub fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.hess
            .iter()
            .map(|row| row.iter().map(|h| h.eval(x)).collect())
            .collect()
    }

    pub fn v(&self, x: &[f64]) -> f64 {
        self.v.eval(x)
    }

    pub fn grad_v(&self, x: &[f64]) -> Vec<f64> {
        self.grad_v.iter().map(|g| g.eval(x)).collect()
    }

    pub fn laplacian_f(&self, x: &[f64]) -> f64 {
        (0..self.n).map(|i| self.hess[i][i].eval(x)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_complex, parse_real};

    #[test]
    fn cubic() {
        let p = Potential::new(&parse_real("x1^3/3", 1).unwrap());
        assert_eq!(p.v(&[2.0]), 16.0);
        assert_eq!(p.grad_v(&[2.0]), vec![32.0]);
        assert_eq!(p.hessian(&[2.0]), vec![vec![4.0]]);
    }

    #[test]
    fn complex_square_has_modulus_potential() {
        let p = Potential::from_complex(&parse_complex("z1^2", 1).unwrap());
        let (u, v) = (0.3, -1.2);
        assert!((p.v(&[u, v]) - 4.0 * (u * u + v * v)).abs() < 1e-14);
    }
}
