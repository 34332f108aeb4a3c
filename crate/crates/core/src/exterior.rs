//! Exterior algebra of ℝⁿ: Clifford actions, supertraces and the Berezin integral.
//!
//! Basis forms `e^I` are indexed by the bitmask of `I` (bit `k` for `e^{k+1}`),
//! so an [`Endo`] on `Λ*ℝⁿ` is a `2ⁿ x 2ⁿ` matrix whose column `J` is the
//! image of `e^J`.

use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 6;

/// Sign of moving a generator with index `i` past the generators of `mask` below it.
#[inline]
fn sign_below(mask: usize, i: usize) -> f64 {
    if (mask & ((1 << i) - 1)).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Sign of the product `e^A e^B` reordered into increasing order (0 if they overlap).
#[inline]
pub fn merge_sign(a: usize, b: usize) -> f64 {
    if a & b != 0 {
        return 0.0;
    }
    let mut swaps = 0u32;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        swaps += (a >> (j + 1)).count_ones();
        rest &= rest - 1;
    }
    if swaps.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Endo {
    n: usize,
    m: DMatrix<f64>,
}

impl Endo {
    pub fn zero(n: usize) -> Self {
        let d = 1 << n;
        Self {
            n,
            m: DMatrix::zeros(d, d),
        }
    }

    pub fn identity(n: usize) -> Self {
        let d = 1 << n;
        Self {
            n,
            m: DMatrix::identity(d, d),
        }
    }

    pub fn from_matrix(n: usize, m: DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), 1 << n);
        assert_eq!(m.ncols(), 1 << n);
        Self { n, m }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn matrix_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.m
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.m[(row, col)]
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            n: self.n,
            m: &self.m * s,
        }
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn supertrace(&self) -> f64 {
        supertrace(self)
    }

    pub fn norm(&self) -> f64 {
        self.m.norm()
    }

    /// Restriction to the diagonal block of form degree `p`.
    pub fn degree_block_diag(&self, p: usize) -> Vec<f64> {
        (0..self.dim())
            .filter(|i| i.count_ones() as usize == p)
            .map(|i| self.m[(i, i)])
            .collect()
    }

    /// True when `e^I` is mapped into forms of the same degree for every `I`.
    pub fn preserves_degree(&self) -> bool {
        let d = self.dim();
        (0..d).all(|r| (0..d).all(|c| r.count_ones() == c.count_ones() || self.m[(r, c)] == 0.0))
    }
}

impl Mul<&Endo> for &Endo {
    type Output = Endo;
    fn mul(self, rhs: &Endo) -> Endo {
        assert_eq!(self.n, rhs.n);
        Endo {
            n: self.n,
            m: &self.m * &rhs.m,
        }
    }
}

impl Add<&Endo> for &Endo {
    type Output = Endo;
    fn add(self, rhs: &Endo) -> Endo {
        assert_eq!(self.n, rhs.n);
        Endo {
            n: self.n,
            m: &self.m + &rhs.m,
        }
    }
}

impl Sub<&Endo> for &Endo {
    type Output = Endo;
    fn sub(self, rhs: &Endo) -> Endo {
        assert_eq!(self.n, rhs.n);
        Endo {
            n: self.n,
            m: &self.m - &rhs.m,
        }
    }
}

fn check_index(n: usize, i: usize) -> Result<usize> {
    if n == 0 || n > MAX_DIM {
        return Err(Error::InvalidArgument(format!("dimension {n} outside 1..={MAX_DIM}")));
    }
    if i == 0 || i > n {
        return Err(Error::IndexOutOfRange { index: i, n });
    }
    Ok(i - 1)
}

/// `e^i ∧`, with 1-based `i`.
pub fn wedge_op(n: usize, i: usize) -> Result<Endo> {
    let k = check_index(n, i)?;
    let mut e = Endo::zero(n);
    for j in 0..e.dim() {
        if j & (1 << k) == 0 {
            e.m[(j | (1 << k), j)] = sign_below(j, k);
        }
    }
    Ok(e)
}

/// `ι_{e_i}`, with 1-based `i`.
pub fn contract_op(n: usize, i: usize) -> Result<Endo> {
    let k = check_index(n, i)?;
    let mut e = Endo::zero(n);
    for j in 0..e.dim() {
        if j & (1 << k) != 0 {
            e.m[(j ^ (1 << k), j)] = sign_below(j, k);
        }
    }
    Ok(e)
}

/// `c(e_i) = e^i∧ - ι_{e_i}`.
pub fn c_op(n: usize, i: usize) -> Result<Endo> {
    Ok(&wedge_op(n, i)? - &contract_op(n, i)?)
}

/// `ĉ(e_i) = e^i∧ + ι_{e_i}`.
pub fn chat_op(n: usize, i: usize) -> Result<Endo> {
    Ok(&wedge_op(n, i)? + &contract_op(n, i)?)
}

fn ordered_product(n: usize, mask: usize, op: fn(usize, usize) -> Result<Endo>) -> Result<Endo> {
    let mut acc = Endo::identity(n);
    for k in 0..n {
        if mask & (1 << k) != 0 {
            acc = &acc * &op(n, k + 1)?;
        }
    }
    Ok(acc)
}

/// `c(e_{i1}) ... c(e_{ik})` for the increasing elements of `mask`.
pub fn c_multi(n: usize, mask: usize) -> Result<Endo> {
    ordered_product(n, mask, c_op)
}

pub fn chat_multi(n: usize, mask: usize) -> Result<Endo> {
    ordered_product(n, mask, chat_op)
}

/// `c(e_i) ĉ(e_j)` for 0-based `i, j`.
pub fn c_chat(n: usize, i: usize, j: usize) -> Endo {
    &c_op(n, i + 1).expect("index checked") * &chat_op(n, j + 1).expect("index checked")
}

/// `Σ H_ij c(e_i) ĉ(e_j)`.
///
/// With this sign the Witten Laplacian reads `Δ + T·lf_endo(∇²f) + T²|∇f|²`:
/// on functions it contributes `-T Δf`, on top forms `+T Δf`.
pub fn lf_endo(h: &[Vec<f64>]) -> Endo {
    let n = h.len();
    let mut acc = Endo::zero(n);
    for i in 0..n {
        assert_eq!(h[i].len(), n, "Hessian must be square");
        for j in 0..n {
            if h[i][j] != 0.0 {
                acc = &acc + &c_chat(n, i, j).scale(h[i][j]);
            }
        }
    }
    acc
}

/// `Σ_I (-1)^{|I|} A[I, I]`.
pub fn supertrace(a: &Endo) -> f64 {
    (0..a.dim())
        .map(|i| if i.count_ones() % 2 == 0 { a.m[(i, i)] } else { -a.m[(i, i)] })
        .sum()
}

/// Element of `Λ*ℝⁿ ⊗ Λ̂*ℝⁿ`, the Grassmann algebra on `e^1..e^n, ê^1..ê^n`.
///
/// Coefficients are indexed by `I | (J << n)` for the canonically ordered
/// monomial `e^I ê^J`.
#[derive(Clone, Debug, PartialEq)]
pub struct DoubleForm {
    n: usize,
    c: Vec<f64>,
}

impl DoubleForm {
    pub fn zero(n: usize) -> Self {
        assert!(n <= MAX_DIM);
        Self {
            n,
            c: vec![0.0; 1 << (2 * n)],
        }
    }

    pub fn one(n: usize) -> Self {
        let mut d = Self::zero(n);
        d.c[0] = 1.0;
        d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn key(&self, i: usize, j: usize) -> usize {
        i | (j << self.n)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.c[self.key(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.key(i, j);
        self.c[k] = v;
    }

    /// `coef · e^I ê^J`.
    pub fn monomial(n: usize, i: usize, j: usize, coef: f64) -> Self {
        let mut d = Self::zero(n);
        d.set(i, j, coef);
        d
    }

    /// `Σ h_ij e^i ê^j`.
    pub fn hessian_form(h: &[Vec<f64>]) -> Self {
        let n = h.len();
        let mut d = Self::zero(n);
        for i in 0..n {
            for j in 0..n {
                let k = d.key(1 << i, 1 << j);
                d.c[k] += h[i][j];
            }
        }
        d
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            n: self.n,
            c: self.c.iter().map(|v| v * s).collect(),
        }
    }

    pub fn scalar_part(&self) -> f64 {
        self.c[0]
    }

    /// True when every nonzero component has even total degree.
    pub fn is_even(&self) -> bool {
        self.c
            .iter()
            .enumerate()
            .all(|(k, v)| *v == 0.0 || k.count_ones() % 2 == 0)
    }

    /// Graded-commutative product.
    pub fn wedge(&self, rhs: &DoubleForm) -> DoubleForm {
        assert_eq!(self.n, rhs.n);
        let mut out = DoubleForm::zero(self.n);
        for (a, &x) in self.c.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (b, &y) in rhs.c.iter().enumerate() {
                if y == 0.0 || a & b != 0 {
                    continue;
                }
                out.c[a | b] += merge_sign(a, b) * x * y;
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &DoubleForm) -> f64 {
        self.c
            .iter()
            .zip(&other.c)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Add<&DoubleForm> for &DoubleForm {
    type Output = DoubleForm;
    fn add(self, rhs: &DoubleForm) -> DoubleForm {
        assert_eq!(self.n, rhs.n);
        DoubleForm {
            n: self.n,
            c: self.c.iter().zip(&rhs.c).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub<&DoubleForm> for &DoubleForm {
    type Output = DoubleForm;
    fn sub(self, rhs: &DoubleForm) -> DoubleForm {
        assert_eq!(self.n, rhs.n);
        DoubleForm {
            n: self.n,
            c: self.c.iter().zip(&rhs.c).map(|(a, b)| a - b).collect(),
        }
    }
}

/// The `ê^{1..n}` component, as coefficients over `Λ*ℝⁿ` indexed by mask.
pub fn berezin(w: &DoubleForm) -> Vec<f64> {
    let full = (1 << w.n) - 1;
    (0..1usize << w.n).map(|i| w.get(i, full)).collect()
}

/// `Σ_{k ≤ 2n} ω^k / k!` for a nilpotent even `ω`.
pub fn exp_doubleform(w: &DoubleForm) -> Result<DoubleForm> {
    if w.scalar_part() != 0.0 {
        return Err(Error::InvalidArgument("exp_doubleform: nonzero scalar part".into()));
    }
    if !w.is_even() {
        return Err(Error::InvalidArgument("exp_doubleform: odd component".into()));
    }
    let mut acc = DoubleForm::one(w.n);
    let mut term = DoubleForm::one(w.n);
    for k in 1..=2 * w.n {
        term = term.wedge(w).scale(1.0 / k as f64);
        acc = &acc + &term;
    }
    Ok(acc)
}

/// Local index density at a point with Hessian `h`, potential value `v`
/// and curvature form `rtilde`.
pub fn index_density(h: &[Vec<f64>], v: f64, rtilde: Option<&DoubleForm>) -> Result<f64> {
    let n = h.len();
    let mut w = DoubleForm::hessian_form(h).scale(-1.0);
    if let Some(r) = rtilde {
        if r.n() != n {
            return Err(Error::InvalidArgument("curvature form has wrong dimension".into()));
        }
        w = &w - &r.scale(0.5);
    }
    let top = berezin(&exp_doubleform(&w)?)[(1 << n) - 1];
    let sign = if n.div_ceil(2).is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(sign * std::f64::consts::PI.powf(-(n as f64) / 2.0) * (-v).exp() * top)
}

/// `(-1)^{[n/2]} det(-H)`.
pub fn berezin_det_oracle(h: &[Vec<f64>]) -> f64 {
    let n = h.len();
    let m = DMatrix::from_fn(n, n, |i, j| -h[i][j]);
    let sign = if (n / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * m.determinant()
}
