//! Sparse multivariate polynomials with exact coefficients.
//!
//! Coefficients are either arbitrary-precision rationals or Gaussian
//! rationals. Float evaluation happens only through [`EvalPoly`] and
//! [`EvalPolyC`], which are compiled once from the exact form.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;
pub type ComplexRational = Complex<BigRational>;

/// Rational `n/d`.
pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Integer as a rational.
pub fn qi(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Coefficient ring of a [`MultiPoly`].
pub trait Coeff:
    Clone
    + PartialEq
    + fmt::Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    fn from_rational(r: Rational) -> Self;
    /// Exact division by a nonzero rational.
    fn div_rational(&self, r: &Rational) -> Self;
    fn to_complex64(&self) -> Complex64;
    /// The imaginary unit, when the ring has one.
    fn imaginary_unit() -> Option<Self>;
    /// Formats the coefficient so the parser reads it back as a single factor.
    fn render(&self) -> String;
    /// `(true, -c)` when `c` is a negative real number, else `(false, c)`.
    fn split_sign(&self) -> (bool, Self);
    /// Multiplicative inverse, `None` for zero.
    fn inverse(&self) -> Option<Self>;
}

impl Coeff for Rational {
    fn from_rational(r: Rational) -> Self {
        r
    }
    fn div_rational(&self, r: &Rational) -> Self {
        self / r
    }
    fn to_complex64(&self) -> Complex64 {
        Complex64::new(rational_to_f64(self), 0.0)
    }
    fn imaginary_unit() -> Option<Self> {
        None
    }
    fn render(&self) -> String {
        let s = format_rational(self);
        if self.is_negative() {
            format!("({s})")
        } else {
            s
        }
    }
    fn split_sign(&self) -> (bool, Self) {
        if self.is_negative() {
            (true, -self.clone())
        } else {
            (false, self.clone())
        }
    }
    fn inverse(&self) -> Option<Self> {
        (!self.is_zero()).then(|| self.recip())
    }
}

impl Coeff for ComplexRational {
    fn from_rational(r: Rational) -> Self {
        Complex::new(r, Rational::zero())
    }
    fn div_rational(&self, r: &Rational) -> Self {
        Complex::new(&self.re / r, &self.im / r)
    }
    fn to_complex64(&self) -> Complex64 {
        Complex64::new(rational_to_f64(&self.re), rational_to_f64(&self.im))
    }
    fn imaginary_unit() -> Option<Self> {
        Some(Complex::new(Rational::zero(), Rational::one()))
    }
    fn render(&self) -> String {
        if self.im.is_zero() {
            return self.re.render();
        }
        let im = if self.im.is_one() {
            "i".to_string()
        } else if (-&self.im).is_one() {
            "-i".to_string()
        } else {
            format!("{}*i", format_rational(&self.im))
        };
        if self.re.is_zero() {
            format!("({im})")
        } else if self.im.is_negative() {
            format!("({}{})", format_rational(&self.re), im)
        } else {
            format!("({}+{})", format_rational(&self.re), im)
        }
    }
    fn split_sign(&self) -> (bool, Self) {
        if self.im.is_zero() && self.re.is_negative() {
            (true, -self.clone())
        } else {
            (false, self.clone())
        }
    }
    fn inverse(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let norm = &self.re * &self.re + &self.im * &self.im;
        Some(Complex::new(&self.re / &norm, -&self.im / &norm))
    }
}

/// Exponent multi-index.
pub type Exponent = Vec<u32>;

#[derive(Clone, PartialEq)]
pub struct MultiPoly<C> {
    nvars: usize,
    terms: BTreeMap<Exponent, C>,
}

impl<C: Coeff> fmt::Debug for MultiPoly<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MultiPoly[{}]({})", self.nvars, self.render("x"))
    }
}

impl<C: Coeff> MultiPoly<C> {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: C) -> Self {
        Self::monomial(nvars, vec![0; nvars], c)
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, C::one())
    }

    /// The variable with 0-based index `i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        assert!(i < nvars, "variable {i} out of range for {nvars} variables");
        let mut e = vec![0; nvars];
        e[i] = 1;
        Self::monomial(nvars, e, C::one())
    }

    pub fn monomial(nvars: usize, exps: Exponent, c: C) -> Self {
        assert_eq!(exps.len(), nvars);
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(exps, c);
        }
        Self { nvars, terms }
    }

    /// Builds a polynomial from (exponent, coefficient) pairs, merging repeats.
    pub fn from_terms<I: IntoIterator<Item = (Exponent, C)>>(nvars: usize, it: I) -> Self {
        let mut p = Self::zero(nvars);
        for (e, c) in it {
            p.add_term(e, c);
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &C)> {
        self.terms.iter()
    }

    pub fn coeff(&self, e: &[u32]) -> C {
        self.terms.get(e).cloned().unwrap_or_else(C::zero)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|e| e.iter().all(|&a| a == 0))
    }

    pub fn constant_term(&self) -> C {
        self.coeff(&vec![0; self.nvars])
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    pub fn degree_in(&self, var: usize) -> u32 {
        self.terms.keys().map(|e| e[var]).max().unwrap_or(0)
    }

    pub fn add_term(&mut self, e: Exponent, c: C) {
        debug_assert_eq!(e.len(), self.nvars);
        if c.is_zero() {
            return;
        }
        match self.terms.entry(e) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get().clone() + c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn scale(&self, c: &C) -> Self {
        if c.is_zero() {
            return Self::zero(self.nvars);
        }
        Self {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(e, a)| (e.clone(), a.clone() * c.clone()))
                .filter(|(_, a)| !a.is_zero())
                .collect(),
        }
    }

    pub fn div_rational(&self, r: &Rational) -> Self {
        assert!(!r.is_zero(), "division by zero");
        Self {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(e, a)| (e.clone(), a.div_rational(r)))
                .collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one(self.nvars);
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Partial derivative with respect to variable `var` (0-based).
    pub fn derivative(&self, var: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            let a = e[var];
            if a == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[var] -= 1;
            out.add_term(e2, c.clone() * C::from_rational(qi(a as i64)));
        }
        out
    }

    /// Replaces variable `i` by `subs[i]`; all substitutes share one variable count.
    pub fn substitute(&self, subs: &[MultiPoly<C>]) -> MultiPoly<C> {
        assert_eq!(subs.len(), self.nvars);
        let target = subs.first().map(|s| s.nvars).unwrap_or(0);
        let mut powers: Vec<Vec<MultiPoly<C>>> = subs.iter().map(|s| vec![MultiPoly::one(s.nvars), s.clone()]).collect();
        let mut out = MultiPoly::zero(target);
        for (e, c) in &self.terms {
            let mut term = MultiPoly::constant(target, c.clone());
            for (i, &a) in e.iter().enumerate() {
                if a == 0 {
                    continue;
                }
                while powers[i].len() <= a as usize {
                    let next = powers[i].last().unwrap() * &subs[i];
                    powers[i].push(next);
                }
                term = &term * &powers[i][a as usize];
            }
            out = &out + &term;
        }
        out
    }

    /// Re-embeds into `nvars` variables, sending old variable `i` to `map[i]`.
    pub fn embed(&self, nvars: usize, map: &[usize]) -> Self {
        assert_eq!(map.len(), self.nvars);
        let mut out = Self::zero(nvars);
        for (e, c) in &self.terms {
            let mut e2 = vec![0; nvars];
            for (i, &a) in e.iter().enumerate() {
                e2[map[i]] += a;
            }
            out.add_term(e2, c.clone());
        }
        out
    }

    pub fn map_coeffs<D: Coeff, F: Fn(&C) -> D>(&self, f: F) -> MultiPoly<D> {
        MultiPoly::from_terms(self.nvars, self.terms.iter().map(|(e, c)| (e.clone(), f(c))))
    }

    pub fn eval_c64(&self, x: &[Complex64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                let mut m = c.to_complex64();
                for (xi, &a) in x.iter().zip(e) {
                    if a > 0 {
                        m *= xi.powu(a);
                    }
                }
                m
            })
            .sum()
    }

    /// Exact evaluation at a point with coefficients in the same ring.
    pub fn eval_exact(&self, x: &[C]) -> C {
        let mut acc = C::zero();
        for (e, c) in &self.terms {
            let mut m = c.clone();
            for (xi, &a) in x.iter().zip(e) {
                for _ in 0..a {
                    m = m * xi.clone();
                }
            }
            acc = acc + m;
        }
        acc
    }

    /// Renders with variables named `{prefix}1 .. {prefix}N`.
    pub fn render(&self, prefix: &str) -> String {
        let names: Vec<String> = (1..=self.nvars).map(|i| format!("{prefix}{i}")).collect();
        self.render_with(&names)
    }

    pub fn render_with(&self, names: &[String]) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        // descending degree reads better
        let mut entries: Vec<_> = self.terms.iter().collect();
        entries.sort_by(|a, b| {
            let da: u32 = a.0.iter().sum();
            let db: u32 = b.0.iter().sum();
            db.cmp(&da).then_with(|| b.0.cmp(a.0))
        });
        let mut out = String::new();
        for (k, (e, c)) in entries.into_iter().enumerate() {
            let mono: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &a)| a > 0)
                .map(|(i, &a)| if a == 1 { names[i].clone() } else { format!("{}^{}", names[i], a) })
                .collect();
            let (neg, mag) = c.split_sign();
            let body = if mono.is_empty() {
                mag.render()
            } else if mag.is_one() {
                mono.join("*")
            } else {
                format!("{}*{}", mag.render(), mono.join("*"))
            };
            match (k, neg) {
                (0, false) => out.push_str(&body),
                (0, true) => {
                    out.push('-');
                    out.push_str(&body);
                }
                (_, false) => {
                    out.push_str(" + ");
                    out.push_str(&body);
                }
                (_, true) => {
                    out.push_str(" - ");
                    out.push_str(&body);
                }
            }
        }
        out
    }
}

impl MultiPoly<Rational> {
    pub fn to_complex(&self) -> MultiPoly<ComplexRational> {
        self.map_coeffs(|c| ComplexRational::from_rational(c.clone()))
    }

    pub fn compile(&self) -> EvalPoly {
        EvalPoly::new(self)
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        self.compile().eval(x)
    }
}

impl MultiPoly<ComplexRational> {
    /// Splits into real and imaginary parts as real polynomials in the `2n`
    /// real coordinates `(u1, v1, u2, v2, ...)` with `z_j = u_j + i v_j`.
    pub fn realify(&self) -> (MultiPoly<Rational>, MultiPoly<Rational>) {
        let n = self.nvars;
        let i_unit = ComplexRational::imaginary_unit().unwrap();
        let subs: Vec<MultiPoly<ComplexRational>> = (0..n)
            .map(|j| {
                let u = MultiPoly::var(2 * n, 2 * j);
                let v = MultiPoly::var(2 * n, 2 * j + 1).scale(&i_unit);
                &u + &v
            })
            .collect();
        let w = self.substitute(&subs);
        let re = MultiPoly::from_terms(2 * n, w.terms().map(|(e, c)| (e.clone(), c.re.clone())));
        let im = MultiPoly::from_terms(2 * n, w.terms().map(|(e, c)| (e.clone(), c.im.clone())));
        (re, im)
    }

    pub fn compile(&self) -> EvalPolyC {
        EvalPolyC::new(self)
    }
}

macro_rules! impl_binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl<C: Coeff> $tr<&MultiPoly<C>> for &MultiPoly<C> {
            type Output = MultiPoly<C>;
            fn $method(self, rhs: &MultiPoly<C>) -> MultiPoly<C> {
                assert_eq!(self.nvars, rhs.nvars, "variable count mismatch");
                let f: fn(&MultiPoly<C>, &MultiPoly<C>) -> MultiPoly<C> = $body;
                f(self, rhs)
            }
        }
        impl<C: Coeff> $tr<MultiPoly<C>> for MultiPoly<C> {
            type Output = MultiPoly<C>;
            fn $method(self, rhs: MultiPoly<C>) -> MultiPoly<C> {
                (&self).$method(&rhs)
            }
        }
        impl<C: Coeff> $tr<&MultiPoly<C>> for MultiPoly<C> {
            type Output = MultiPoly<C>;
            fn $method(self, rhs: &MultiPoly<C>) -> MultiPoly<C> {
                (&self).$method(rhs)
            }
        }
    };
}

impl_binop!(Add, add, |a, b| {
    let mut out = a.clone();
    for (e, c) in &b.terms {
        out.add_term(e.clone(), c.clone());
    }
    out
});

impl_binop!(Sub, sub, |a, b| {
    let mut out = a.clone();
    for (e, c) in &b.terms {
        out.add_term(e.clone(), -c.clone());
    }
    out
});

impl_binop!(Mul, mul, |a, b| {
    let mut out = MultiPoly::zero(a.nvars);
    for (ea, ca) in &a.terms {
        for (eb, cb) in &b.terms {
            let e: Exponent = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
            out.add_term(e, ca.clone() * cb.clone());
        }
    }
    out
});

impl<C: Coeff> Neg for &MultiPoly<C> {
    type Output = MultiPoly<C>;
    fn neg(self) -> MultiPoly<C> {
        MultiPoly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c.clone())).collect(),
        }
    }
}

impl<C: Coeff> Neg for MultiPoly<C> {
    type Output = MultiPoly<C>;
    fn neg(self) -> MultiPoly<C> {
        -&self
    }
}

/// Float evaluator for a real polynomial.
#[derive(Clone, Debug)]
pub struct EvalPoly {
    nvars: usize,
    max_exp: Vec<u32>,
    terms: Vec<(Exponent, f64)>,
}

impl EvalPoly {
    pub fn new(p: &MultiPoly<Rational>) -> Self {
        let max_exp = (0..p.nvars()).map(|i| p.degree_in(i)).collect();
        Self {
            nvars: p.nvars(),
            max_exp,
            terms: p.terms().map(|(e, c)| (e.clone(), rational_to_f64(c))).collect(),
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert!(x.len() >= self.nvars);
        match self.terms.len() {
            0 => 0.0,
            1..=3 => self
                .terms
                .iter()
                .map(|(e, c)| {
                    e.iter()
                        .zip(x)
                        .fold(*c, |m, (&a, &xi)| if a == 0 { m } else { m * xi.powi(a as i32) })
                })
                .sum(),
            _ => {
                // tabulate powers once per call
                let pows: Vec<Vec<f64>> = self
                    .max_exp
                    .iter()
                    .zip(x)
                    .map(|(&m, &xi)| {
                        let mut v = Vec::with_capacity(m as usize + 1);
                        let mut acc = 1.0;
                        v.push(acc);
                        for _ in 0..m {
                            acc *= xi;
                            v.push(acc);
                        }
                        v
                    })
                    .collect();
                self.terms
                    .iter()
                    .map(|(e, c)| e.iter().enumerate().fold(*c, |m, (i, &a)| m * pows[i][a as usize]))
                    .sum()
            }
        }
    }
}

/// Float evaluator for a complex-coefficient polynomial at complex points.
#[derive(Clone, Debug)]
pub struct EvalPolyC {
    nvars: usize,
    terms: Vec<(Exponent, Complex64)>,
}

impl EvalPolyC {
    pub fn new(p: &MultiPoly<ComplexRational>) -> Self {
        Self {
            nvars: p.nvars(),
            terms: p.terms().map(|(e, c)| (e.clone(), c.to_complex64())).collect(),
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                e.iter()
                    .zip(z)
                    .fold(*c, |m, (&a, zi)| if a == 0 { m } else { m * zi.powu(a) })
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(n: usize, i: usize) -> MultiPoly<Rational> {
        MultiPoly::var(n, i)
    }

    #[test]
    fn arithmetic_and_cancellation() {
        let a = &x(2, 0) + &x(2, 1);
        let b = &x(2, 0) - &x(2, 1);
        let p = &a * &b;
        let expect = &x(2, 0).pow(2) - &x(2, 1).pow(2);
        assert_eq!(p, expect);
        assert!((&p - &expect).is_zero());
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn derivative_of_cubic() {
        let p = x(1, 0).pow(3).div_rational(&qi(3));
        assert_eq!(p.derivative(0), x(1, 0).pow(2));
        assert!(MultiPoly::<Rational>::constant(1, qi(5)).derivative(0).is_zero());
    }

    #[test]
    fn substitution_expands() {
        // (u + v)^2 with u = s, v = 1 - s gives 1
        let p = (&x(2, 0) + &x(2, 1)).pow(2);
        let s = x(1, 0);
        let one = MultiPoly::one(1);
        let r = p.substitute(&[s.clone(), &one - &s]);
        assert_eq!(r, one);
    }

    #[test]
    fn realify_square() {
        let z = MultiPoly::<ComplexRational>::var(1, 0);
        let (re, im) = z.pow(2).realify();
        // z^2 = u^2 - v^2 + 2 i u v
        let u = x(2, 0);
        let v = x(2, 1);
        assert_eq!(re, &u.pow(2) - &v.pow(2));
        assert_eq!(im, (&u * &v).scale(&qi(2)));
    }

    #[test]
    fn float_eval_matches_exact() {
        let p = (&x(2, 0).pow(3) - &(&x(2, 0) * &x(2, 1)).scale(&q(3, 2))) + MultiPoly::constant(2, qi(7));
        let pt = [q(1, 3), q(-2, 5)];
        let exact = rational_to_f64(&p.eval_exact(&pt));
        let fl = p.eval_f64(&[1.0 / 3.0, -0.4]);
        assert!((exact - fl).abs() < 1e-14);
    }

    #[test]
    fn render_is_readable() {
        let p = x(2, 0).pow(2).div_rational(&qi(2)) - x(2, 1);
        assert_eq!(p.render("x"), "1/2*x1^2 - x2");
        let z = MultiPoly::<ComplexRational>::var(1, 0).scale(&ComplexRational::new(q(1, 2), qi(-3)));
        assert_eq!(z.render("z"), "(1/2-3*i)*z1");
    }
}
