//! Heat-kernel parametrix `K^k = E₀ E₁ Σ_{j≤k} t^j Θ_{T,j}` on flat ℝⁿ.
//!
//! Coefficients are exact polynomials in `(x₁..xₙ, w₁..wₙ, T)` with
//! `w = y - x`; `y`-derivatives at fixed `x` are `w`-derivatives, and the
//! segment `x + u(y - x)` is the substitution `w -> u w`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exterior::{c_chat, lf_endo, supertrace, Endo};
use crate::numerics::richardson_derivative;
use crate::poly::{format_rational, qi, EvalPoly, MultiPoly, Rational};
use crate::potential::Potential;

type Poly = MultiPoly<Rational>;

/// Variable layout of the symbolic tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub n: usize,
}

impl Layout {
    pub fn nvars(self) -> usize {
        2 * self.n + 1
    }
    pub fn x(self, i: usize) -> usize {
        i
    }
    pub fn w(self, i: usize) -> usize {
        self.n + i
    }
    pub fn t_var(self) -> usize {
        2 * self.n
    }
    pub fn names(self) -> Vec<String> {
        (1..=self.n)
            .map(|i| format!("x{i}"))
            .chain((1..=self.n).map(|i| format!("w{i}")))
            .chain(std::iter::once("T".to_string()))
            .collect()
    }
    /// `P(x)` re-expressed as `P(x + w)`.
    pub fn shift_to_y(self, p: &Poly) -> Poly {
        let nv = self.nvars();
        let subs: Vec<Poly> = (0..nv)
            .map(|i| {
                if i < self.n {
                    &MultiPoly::var(nv, self.x(i)) + &MultiPoly::var(nv, self.w(i))
                } else {
                    MultiPoly::var(nv, i)
                }
            })
            .collect();
        p.substitute(&subs)
    }
    pub fn w_degree(self, e: &[u32]) -> u32 {
        e[self.n..2 * self.n].iter().sum()
    }
    /// `∫₀¹ u^j P(x, u w) du`.
    pub fn segment_integral(self, p: &Poly, j: u32) -> Poly {
        MultiPoly::from_terms(
            p.nvars(),
            p.terms()
                .map(|(e, c)| (e.clone(), c / qi((j + self.w_degree(e) + 1) as i64))),
        )
    }
    pub fn point(self, x: &[f64], w: &[f64], t_coupling: f64) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.nvars());
        p.extend_from_slice(x);
        p.extend_from_slice(w);
        p.push(t_coupling);
        p
    }
}

/// `2ⁿ x 2ⁿ` matrix of polynomials in the table variables.
#[derive(Clone, Debug, PartialEq)]
pub struct EndoPoly {
    n: usize,
    nvars: usize,
    entries: BTreeMap<(usize, usize), Poly>,
}

impl EndoPoly {
    pub fn zero(n: usize, nvars: usize) -> Self {
        Self {
            n,
            nvars,
            entries: BTreeMap::new(),
        }
    }

    pub fn identity(n: usize, nvars: usize) -> Self {
        let mut e = Self::zero(n, nvars);
        for i in 0..1 << n {
            e.entries.insert((i, i), MultiPoly::one(nvars));
        }
        e
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(usize, usize), &Poly)> {
        self.entries.iter()
    }

    pub fn entry(&self, r: usize, c: usize) -> Poly {
        self.entries
            .get(&(r, c))
            .cloned()
            .unwrap_or_else(|| MultiPoly::zero(self.nvars))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    fn insert_add(&mut self, key: (usize, usize), p: Poly) {
        if p.is_zero() {
            return;
        }
        let sum = match self.entries.remove(&key) {
            Some(prev) => &prev + &p,
            None => p,
        };
        if !sum.is_zero() {
            self.entries.insert(key, sum);
        }
    }

    /// Constant integer-valued operator times a polynomial.
    pub fn from_endo_times(e: &Endo, p: &Poly) -> Self {
        let mut out = Self::zero(e.n(), p.nvars());
        for r in 0..e.dim() {
            for c in 0..e.dim() {
                let v = e.get(r, c);
                if v != 0.0 {
                    debug_assert_eq!(v, v.round());
                    out.insert_add((r, c), p.scale(&qi(v as i64)));
                }
            }
        }
        out
    }

    pub fn map<F: Fn(&Poly) -> Poly>(&self, f: F) -> Self {
        let mut out = Self::zero(self.n, self.nvars);
        for (k, p) in &self.entries {
            out.insert_add(*k, f(p));
        }
        out
    }

    pub fn scale_poly(&self, p: &Poly) -> Self {
        self.map(|e| e * p)
    }

    pub fn add(&self, rhs: &EndoPoly) -> Self {
        let mut out = self.clone();
        for (k, p) in &rhs.entries {
            out.insert_add(*k, p.clone());
        }
        out
    }

    pub fn sub(&self, rhs: &EndoPoly) -> Self {
        let mut out = self.clone();
        for (k, p) in &rhs.entries {
            out.insert_add(*k, -p);
        }
        out
    }

    pub fn mul(&self, rhs: &EndoPoly) -> Self {
        let mut out = Self::zero(self.n, self.nvars);
        for (&(r, k), a) in &self.entries {
            for (&(_, c), b) in rhs.entries.range((k, 0)..(k + 1, 0)) {
                out.insert_add((r, c), a * b);
            }
        }
        out
    }

    pub fn derivative(&self, var: usize) -> Self {
        self.map(|p| p.derivative(var))
    }

    /// Largest power of the variable `var` over all entries.
    pub fn degree_in(&self, var: usize) -> u32 {
        self.entries.values().map(|p| p.degree_in(var)).max().unwrap_or(0)
    }

    /// Coefficient of `var^l`, with `var` set to zero afterwards.
    pub fn coefficient_of(&self, var: usize, l: u32) -> Self {
        self.map(|p| {
            MultiPoly::from_terms(
                p.nvars(),
                p.terms().filter(|(e, _)| e[var] == l).map(|(e, c)| {
                    let mut e = e.clone();
                    e[var] = 0;
                    (e, c.clone())
                }),
            )
        })
    }

    pub fn compile(&self) -> CompiledEndoPoly {
        CompiledEndoPoly {
            n: self.n,
            entries: self.entries.iter().map(|(k, p)| (*k, p.compile())).collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CompiledEndoPoly {
    n: usize,
    entries: Vec<((usize, usize), EvalPoly)>,
}

impl CompiledEndoPoly {
    pub fn eval(&self, point: &[f64]) -> Endo {
        let mut e = Endo::zero(self.n);
        self.accumulate(point, 1.0, &mut e);
        e
    }

    pub fn accumulate(&self, point: &[f64], scale: f64, out: &mut Endo) {
        let m = out.matrix_mut();
        for ((r, c), p) in &self.entries {
            m[(*r, *c)] += scale * p.eval(point);
        }
    }

    /// Supertrace without materializing the matrix.
    pub fn supertrace(&self, point: &[f64]) -> f64 {
        self.entries
            .iter()
            .filter(|((r, c), _)| r == c)
            .map(|((r, _), p)| if r.count_ones() % 2 == 0 { p.eval(point) } else { -p.eval(point) })
            .sum()
    }
}

/// `h(x, y) = ∫₀¹ V(x + u(y - x)) du` in the table variables.
pub fn h_poly(pot: &Potential) -> Poly {
    let lay = Layout { n: pot.n() };
    let v = pot.v_poly().embed(lay.nvars(), &(0..pot.n()).collect::<Vec<_>>());
    lay.segment_integral(&lay.shift_to_y(&v), 0)
}

/// `Σ H_ij(y) c(e_i) ĉ(e_j)` in the table variables.
pub fn lf_endo_poly(pot: &Potential) -> EndoPoly {
    let n = pot.n();
    let lay = Layout { n };
    let hess = crate::calculus::hessian(pot.source());
    let map: Vec<usize> = (0..n).collect();
    let mut acc = EndoPoly::zero(n, lay.nvars());
    for i in 0..n {
        for j in 0..n {
            if hess[i][j].is_zero() {
                continue;
            }
            let hij = lay.shift_to_y(&hess[i][j].embed(lay.nvars(), &map));
            acc = acc.add(&EndoPoly::from_endo_times(&c_chat(n, i, j), &hij));
        }
    }
    acc
}

/// Building blocks shared by the recursion and the remainder.
struct Sources {
    lay: Layout,
    /// `T · A(y)`
    t_a: EndoPoly,
    /// `Δ h_T`, positive Laplacian in `y`.
    lap_ht: Poly,
    /// `∂_{y_i} h_T`
    grad_ht: Vec<Poly>,
    /// `|∇h_T|²`
    grad_ht_sq: Poly,
}

impl Sources {
    fn new(pot: &Potential, h: &Poly) -> Self {
        let lay = Layout { n: pot.n() };
        let nv = lay.nvars();
        let t = MultiPoly::var(nv, lay.t_var());
        let t2 = &t * &t;
        let ht = &t2 * h;
        let grad_ht: Vec<Poly> = (0..lay.n).map(|i| ht.derivative(lay.w(i))).collect();
        let lap_ht = -(0..lay.n).fold(MultiPoly::zero(nv), |acc, i| &acc + &grad_ht[i].derivative(lay.w(i)));
        let grad_ht_sq = grad_ht.iter().fold(MultiPoly::zero(nv), |acc, g| &acc + &(g * g));
        Self {
            lay,
            t_a: lf_endo_poly(pot).scale_poly(&t),
            lap_ht,
            grad_ht,
            grad_ht_sq,
        }
    }

    fn laplacian(&self, th: &EndoPoly) -> EndoPoly {
        let mut acc = EndoPoly::zero(self.lay.n, self.lay.nvars());
        for i in 0..self.lay.n {
            let w = self.lay.w(i);
            acc = acc.sub(&th.derivative(w).derivative(w));
        }
        acc
    }

    /// `-Δh_T Θ + 2∇_{∇h_T}Θ`
    fn first_order(&self, th: &EndoPoly) -> EndoPoly {
        let mut acc = th.scale_poly(&-&self.lap_ht);
        for i in 0..self.lay.n {
            let d = th.derivative(self.lay.w(i));
            acc = acc.add(&d.scale_poly(&self.grad_ht[i].scale(&qi(2))));
        }
        acc
    }

    /// Source bracket at step `j`, from `Θ_j, Θ_{j-1}, Θ_{j-2}` (absent ones are zero).
    fn bracket(&self, th: &[Option<&EndoPoly>; 3]) -> EndoPoly {
        let mut acc = EndoPoly::zero(self.lay.n, self.lay.nvars());
        if let Some(t0) = th[0] {
            acc = acc.add(&self.laplacian(t0)).add(&self.t_a.mul(t0));
        }
        if let Some(t1) = th[1] {
            acc = acc.add(&self.first_order(t1));
        }
        if let Some(t2) = th[2] {
            acc = acc.sub(&t2.scale_poly(&self.grad_ht_sq));
        }
        acc
    }
}

#[derive(Clone, Debug)]
pub struct ThetaTable {
    pot: Potential,
    source_text: String,
    order: usize,
    h: Poly,
    thetas: Vec<EndoPoly>,
    /// Brackets `B₀, B₁, B₂` with `R_k = E₀E₁ (B₀ + t B₁ + t² B₂)`.
    remainder: [EndoPoly; 3],
}

/// Recursion `Θ_{j+1}(x, y) = -∫₀¹ u^j S_j(x, x + u(y - x)) du`, `Θ₀ = Id`.
pub fn theta_recursion(f: &MultiPoly<Rational>, order: usize) -> ThetaTable {
    let pot = Potential::new(f);
    let h = h_poly(&pot);
    let src = Sources::new(&pot, &h);
    let lay = src.lay;
    let mut thetas = vec![EndoPoly::identity(lay.n, lay.nvars())];
    for j in 0..order {
        let s = src.bracket(&[thetas.get(j), j.checked_sub(1).map(|i| &thetas[i]), j.checked_sub(2).map(|i| &thetas[i])]);
        let next = s.map(|p| lay.segment_integral(p, j as u32)).map(|p| -p);
        thetas.push(next);
    }
    let remainder = remainder_brackets(&src, &thetas);
    ThetaTable {
        source_text: f.render("x"),
        pot,
        order,
        h,
        thetas,
        remainder,
    }
}

fn remainder_brackets(src: &Sources, th: &[EndoPoly]) -> [EndoPoly; 3] {
    let k = th.len() - 1;
    let at = |d: usize| k.checked_sub(d).map(|i| &th[i]);
    [
        src.bracket(&[at(0), at(1), at(2)]),
        src.bracket(&[None, at(0), at(1)]),
        src.bracket(&[None, None, at(0)]),
    ]
}

pub fn e0_eval(t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((4.0 * PI * t).powf(-(x.len() as f64) / 2.0) * (-d2 / (4.0 * t)).exp())
}

pub fn e1_eval(t: f64, coupling: f64, h: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    Ok((-t * coupling * coupling * h).exp())
}

/// Violations of `deg_T Θ_{T,j} ≤ j + [j/3]`.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct GradingReport {
    /// `(j, max T-degree, bound)` per coefficient.
    pub degrees: Vec<(usize, u32, u32)>,
    /// `(j, l)` pairs with a nonzero coefficient above the bound.
    pub violations: Vec<(usize, u32)>,
}

impl GradingReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn grading_bound(j: usize) -> u32 {
    (j + j / 3) as u32
}

pub fn t_grading(tab: &ThetaTable) -> GradingReport {
    let tv = tab.layout().t_var();
    let mut degrees = Vec::new();
    let mut violations = Vec::new();
    for (j, th) in tab.thetas.iter().enumerate() {
        let deg = th.degree_in(tv);
        let bound = grading_bound(j);
        for l in bound + 1..=deg {
            if !th.coefficient_of(tv, l).is_zero() {
                violations.push((j, l));
            }
        }
        degrees.push((j, deg, bound));
    }
    GradingReport { degrees, violations }
}

impl ThetaTable {
    pub fn layout(&self) -> Layout {
        Layout { n: self.pot.n() }
    }

    pub fn n(&self) -> usize {
        self.pot.n()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn potential(&self) -> &Potential {
        &self.pot
    }

    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    pub fn h(&self) -> &Poly {
        &self.h
    }

    pub fn theta(&self, j: usize) -> &EndoPoly {
        &self.thetas[j]
    }

    pub fn remainder_brackets(&self) -> &[EndoPoly; 3] {
        &self.remainder
    }

    /// `Θ_{l,j}`: coefficient of `T^l` in `Θ_{T,j}`.
    pub fn graded(&self, j: usize, l: u32) -> EndoPoly {
        self.thetas[j].coefficient_of(self.layout().t_var(), l)
    }

    /// `(y - x)·∇_y h + h - V(y)`, identically zero.
    pub fn e0_identity_residual(&self) -> Poly {
        let lay = self.layout();
        let nv = lay.nvars();
        let radial = (0..lay.n).fold(MultiPoly::zero(nv), |acc, i| {
            &acc + &(&MultiPoly::var(nv, lay.w(i)) * &self.h.derivative(lay.w(i)))
        });
        let v = lay.shift_to_y(&self.pot.v_poly().embed(nv, &(0..lay.n).collect::<Vec<_>>()));
        &(&radial + &self.h) - &v
    }

    pub fn compile(&self) -> CompiledTheta {
        let lay = self.layout();
        let grads = |th: &EndoPoly| -> Vec<(CompiledEndoPoly, CompiledEndoPoly)> {
            (0..lay.n)
                .map(|i| {
                    let d = th.derivative(lay.w(i));
                    let dd = d.derivative(lay.w(i));
                    (d.compile(), dd.compile())
                })
                .collect()
        };
        CompiledTheta {
            lay,
            order: self.order,
            pot: self.pot.clone(),
            thetas: self.thetas.iter().map(|t| t.compile()).collect(),
            theta_derivs: self.thetas.iter().map(grads).collect(),
            h: self.h.compile(),
            h_derivs: (0..lay.n)
                .map(|i| {
                    let d = self.h.derivative(lay.w(i));
                    (d.compile(), d.derivative(lay.w(i)).compile())
                })
                .collect(),
            remainder: [
                self.remainder[0].compile(),
                self.remainder[1].compile(),
                self.remainder[2].compile(),
            ],
        }
    }

    pub fn to_doc(&self) -> ThetaDoc {
        let lay = self.layout();
        let tv = lay.t_var();
        let keep: Vec<usize> = (0..2 * lay.n).collect();
        let strip = |p: &Poly| -> Vec<TermDoc> {
            p.terms()
                .map(|(e, c)| TermDoc {
                    exp: keep.iter().map(|&i| e[i]).collect(),
                    coef: format_rational(c),
                })
                .collect()
        };
        let mut entries = Vec::new();
        for (j, th) in self.thetas.iter().enumerate() {
            for l in 0..=th.degree_in(tv) {
                let g = th.coefficient_of(tv, l);
                if g.is_zero() {
                    continue;
                }
                entries.push(GradedDoc {
                    j,
                    l,
                    matrix: g
                        .entries()
                        .map(|(&(row, col), p)| MatrixEntryDoc {
                            row,
                            col,
                            terms: strip(p),
                        })
                        .collect(),
                });
            }
        }
        ThetaDoc {
            potential: self.source_text.clone(),
            nvars: lay.n,
            order: self.order,
            vars: lay.names()[..2 * lay.n].to_vec(),
            h: strip(&self.h),
            thetas: entries,
        }
    }

    pub fn from_doc(doc: &ThetaDoc) -> Result<Self> {
        let f = crate::parse::parse_real(&doc.potential, doc.nvars)?;
        let pot = Potential::new(&f);
        let lay = Layout { n: doc.nvars };
        let nv = lay.nvars();
        let build = |terms: &[TermDoc], l: u32| -> Result<Poly> {
            let mut p = MultiPoly::zero(nv);
            for t in terms {
                if t.exp.len() != 2 * lay.n {
                    return Err(Error::InvalidArgument("term exponent has wrong length".into()));
                }
                let c = Rational::from_str(&t.coef)
                    .map_err(|_| Error::InvalidArgument(format!("bad coefficient `{}`", t.coef)))?;
                let mut e = t.exp.clone();
                e.push(l);
                p.add_term(e, c);
            }
            Ok(p)
        };
        let h = build(&doc.h, 0)?;
        let mut thetas = vec![EndoPoly::zero(lay.n, nv); doc.order + 1];
        for g in &doc.thetas {
            if g.j > doc.order {
                return Err(Error::InvalidArgument(format!("entry j={} beyond order", g.j)));
            }
            for m in &g.matrix {
                let dim = 1 << lay.n;
                if m.row >= dim || m.col >= dim {
                    return Err(Error::InvalidArgument("matrix index out of range".into()));
                }
                thetas[g.j].insert_add((m.row, m.col), build(&m.terms, g.l)?);
            }
        }
        let src = Sources::new(&pot, &h);
        let remainder = remainder_brackets(&src, &thetas);
        Ok(Self {
            source_text: doc.potential.clone(),
            pot,
            order: doc.order,
            h,
            thetas,
            remainder,
        })
    }

    pub fn same_coefficients(&self, other: &ThetaTable) -> bool {
        self.order == other.order && self.h == other.h && self.thetas == other.thetas
    }
}

/// JSON form of a [`ThetaTable`]: per-`(j, l)` matrices of polynomials in `(x, w)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaDoc {
    pub potential: String,
    pub nvars: usize,
    pub order: usize,
    pub vars: Vec<String>,
    pub h: Vec<TermDoc>,
    pub thetas: Vec<GradedDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradedDoc {
    pub j: usize,
    pub l: u32,
    pub matrix: Vec<MatrixEntryDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixEntryDoc {
    pub row: usize,
    pub col: usize,
    pub terms: Vec<TermDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermDoc {
    pub exp: Vec<u32>,
    pub coef: String,
}

/// Float evaluators for a [`ThetaTable`].
#[derive(Clone, Debug)]
pub struct CompiledTheta {
    lay: Layout,
    order: usize,
    pot: Potential,
    thetas: Vec<CompiledEndoPoly>,
    /// Per `j`, per axis: `(∂_{w_i} Θ_j, ∂²_{w_i} Θ_j)`.
    theta_derivs: Vec<Vec<(CompiledEndoPoly, CompiledEndoPoly)>>,
    h: EvalPoly,
    h_derivs: Vec<(EvalPoly, EvalPoly)>,
    remainder: [CompiledEndoPoly; 3],
}

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("t must be positive, got {t}")))
    }
}

fn diff(x: &[f64], y: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(b, a)| b - a).collect()
}

impl CompiledTheta {
    pub fn n(&self) -> usize {
        self.lay.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn h(&self, x: &[f64], y: &[f64]) -> f64 {
        self.h.eval(&self.lay.point(x, &diff(x, y), 0.0))
    }

    /// `Σ_{j≤k} t^j Θ_j(x, y)` for `k ≤ order`.
    pub fn series(&self, k: usize, t: f64, coupling: f64, x: &[f64], y: &[f64]) -> Endo {
        let pt = self.lay.point(x, &diff(x, y), coupling);
        let mut acc = Endo::zero(self.lay.n);
        for (j, th) in self.thetas.iter().enumerate().take(k + 1) {
            th.accumulate(&pt, t.powi(j as i32), &mut acc);
        }
        acc
    }

    pub fn parametrix(&self, k: usize, t: f64, coupling: f64, x: &[f64], y: &[f64]) -> Result<Endo> {
        check_t(t)?;
        let pref = e0_eval(t, x, y)? * e1_eval(t, coupling, self.h(x, y))?;
        Ok(self.series(k, t, coupling, x, y).scale(pref))
    }

    /// `R_k` with `(∂_t + □) K^k = t^k R_k`, for `k = order`.
    pub fn remainder(&self, t: f64, coupling: f64, x: &[f64], y: &[f64]) -> Result<Endo> {
        check_t(t)?;
        let pt = self.lay.point(x, &diff(x, y), coupling);
        let mut acc = Endo::zero(self.lay.n);
        for (p, b) in self.remainder.iter().enumerate() {
            b.accumulate(&pt, t.powi(p as i32), &mut acc);
        }
        let pref = e0_eval(t, x, y)? * e1_eval(t, coupling, self.h(x, y))?;
        Ok(acc.scale(pref))
    }

    /// `(∂_t + □_y) K^k` with `∂_t` of `E₁ Σ t^j Θ_j` by Richardson-refined
    /// central differences and `□_y` applied through exact derivatives.
    pub fn heat_operator_applied(
        &self,
        k: usize,
        t: f64,
        coupling: f64,
        x: &[f64],
        y: &[f64],
        levels: usize,
    ) -> Result<Endo> {
        check_t(t)?;
        let n = self.lay.n;
        let w = diff(x, y);
        let pt = self.lay.point(x, &w, coupling);
        let h = self.h.eval(&pt);
        let t2 = coupling * coupling;
        let e0 = e0_eval(t, x, y)?;
        let smooth = |s: f64| -> Vec<f64> {
            let e1 = (-s * t2 * h).exp();
            self.series(k, s, coupling, x, y).scale(e1).matrix().as_slice().to_vec()
        };
        let d_smooth = richardson_derivative(smooth, t, 0.25 * t, levels);
        let g = smooth(t);
        let d2: f64 = w.iter().map(|v| v * v).sum();
        let de0 = -(n as f64) / (2.0 * t) + d2 / (4.0 * t * t);
        let dim = 1 << n;
        let dt = nalgebra::DMatrix::from_fn(dim, dim, |r, c| {
            let i = c * dim + r;
            e0 * (de0 * g[i] + d_smooth[i])
        });

        // Δ_y (e^φ P) = -e^φ Σ_i [(φ_ii + φ_i²) P + 2 φ_i ∂_i P + ∂_i² P]
        let e1 = (-t * t2 * h).exp();
        let pref = e0 * e1;
        let p = self.series(k, t, coupling, x, y);
        let mut lap = Endo::zero(n);
        for i in 0..n {
            let (dh, ddh) = (&self.h_derivs[i].0, &self.h_derivs[i].1);
            let phi_i = -w[i] / (2.0 * t) - t * t2 * dh.eval(&pt);
            let phi_ii = -1.0 / (2.0 * t) - t * t2 * ddh.eval(&pt);
            let mut dp = Endo::zero(n);
            let mut ddp = Endo::zero(n);
            for j in 0..=k.min(self.order) {
                let s = t.powi(j as i32);
                self.theta_derivs[j][i].0.accumulate(&pt, s, &mut dp);
                self.theta_derivs[j][i].1.accumulate(&pt, s, &mut ddp);
            }
            let term = &(&p.scale(phi_ii + phi_i * phi_i) + &dp.scale(2.0 * phi_i)) + &ddp;
            lap = &lap - &term;
        }
        let a = lf_endo(&self.pot.hessian(y));
        let box_k = &(&lap.scale(pref) + &(&a * &p).scale(coupling * pref)) + &p.scale(t2 * self.pot.v(y) * pref);
        Ok(&Endo::from_matrix(n, dt) + &box_k)
    }

    /// Supertrace of `Θ_{l,j}(x, x)` for all `(j, l)`.
    pub fn diagonal_supertraces(&self, tab: &ThetaTable, x: &[f64]) -> Vec<(usize, u32, f64)> {
        let lay = self.lay;
        let pt = lay.point(x, &vec![0.0; lay.n], 0.0);
        let tv = lay.t_var();
        let mut out = Vec::new();
        for j in 0..=self.order {
            let th = tab.theta(j);
            for l in 0..=th.degree_in(tv) {
                let g = th.coefficient_of(tv, l);
                if !g.is_zero() {
                    out.push((j, l, g.compile().supertrace(&pt)));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DefectReport {
    pub defect: f64,
    pub absolute: f64,
    pub reference: f64,
}

/// Relative mismatch `‖(∂_t + □)K^k - t^k R_k‖ / (‖t^k R_k‖ + ε)` at `k = order`.
pub fn pde_defect_check(
    ct: &CompiledTheta,
    t: f64,
    coupling: f64,
    x: &[f64],
    y: &[f64],
    levels: usize,
) -> Result<DefectReport> {
    let k = ct.order;
    let lhs = ct.heat_operator_applied(k, t, coupling, x, y, levels)?;
    let rhs = ct.remainder(t, coupling, x, y)?.scale(t.powi(k as i32));
    let absolute = (&lhs - &rhs).norm();
    let reference = rhs.norm();
    let scale = ct.parametrix(k, t, coupling, x, y)?.norm() / t;
    let eps = 1e-13 * scale + f64::MIN_POSITIVE;
    Ok(DefectReport {
        defect: absolute / (reference + eps),
        absolute,
        reference,
    })
}

/// One group of the diagonal expansion: all `(j, l)` with `j - l/2 = κ`.
#[derive(Clone, Debug, Serialize)]
pub struct ExpansionGroup {
    /// `2κ`
    pub twice_exponent: u32,
    pub exponent: f64,
    pub value: f64,
    /// All contributing `j` are within the table order.
    pub complete: bool,
    pub needed_order: usize,
}

/// Largest `j` that can contribute to the `t^κ` group.
pub fn group_max_j(twice_kappa: u32) -> usize {
    let mut best = 0;
    for j in 0..=(3 * twice_kappa as usize + 6) {
        if 2 * j >= twice_kappa as usize {
            let l = 2 * j - twice_kappa as usize;
            if l as u32 <= grading_bound(j) {
                best = j;
            }
        }
    }
    best
}

/// `(4πt)^{n/2} e^{V(x)} K(t, x, x)` as a series in `t^{j - l/2}` with `T = t^{-1/2}`.
pub fn diagonal_expansion(tab: &ThetaTable, ct: &CompiledTheta, x: &[f64]) -> Vec<ExpansionGroup> {
    let mut groups: BTreeMap<u32, f64> = BTreeMap::new();
    for (j, l, v) in ct.diagonal_supertraces(tab, x) {
        let twice = 2 * j as u32 - l;
        *groups.entry(twice).or_insert(0.0) += v;
    }
    let max_twice = 2 * tab.order() as u32;
    for tk in 0..=max_twice {
        groups.entry(tk).or_insert(0.0);
    }
    groups
        .into_iter()
        .map(|(tk, value)| {
            let needed = group_max_j(tk);
            ExpansionGroup {
                twice_exponent: tk,
                exponent: tk as f64 / 2.0,
                value,
                complete: needed <= tab.order(),
                needed_order: needed,
            }
        })
        .collect()
}

/// `(4π)^{-n/2} e^{-V(x)}` times the supertraced `t^{n/2}` group.
pub fn index_density_from_expansion(tab: &ThetaTable, ct: &CompiledTheta, x: &[f64]) -> Result<f64> {
    let n = tab.n();
    let needed = group_max_j(n as u32);
    if needed > tab.order() {
        return Err(Error::ExponentBeyondOrder {
            requested: n as f64 / 2.0,
            needed,
            have: tab.order(),
        });
    }
    let g = diagonal_expansion(tab, ct, x)
        .into_iter()
        .find(|g| g.twice_exponent == n as u32)
        .map(|g| g.value)
        .unwrap_or(0.0);
    Ok((4.0 * PI).powf(-(n as f64) / 2.0) * (-tab.potential().v(x)).exp() * g)
}

/// Empirical constants for `|Θ_{T,j}| ≤ C V̄^{κ' j} T^{j+[j/3]}` and for
/// `V̄^l e^{-(1-a)(d²/4t + tT²h)} t^l T^{2l}`, with `V̄ = 1 + max_segment V`.
#[derive(Clone, Debug, Serialize)]
pub struct BoundProbe {
    pub theta_constants: Vec<f64>,
    pub vexpv_sup: Vec<((f64, u32), f64)>,
}

pub fn bound_probe(ct: &CompiledTheta, kappa_p: f64, points: &[(f64, f64, Vec<f64>, Vec<f64>)]) -> BoundProbe {
    let vbar = |x: &[f64], y: &[f64]| -> f64 {
        (0..=32)
            .map(|s| {
                let u = s as f64 / 32.0;
                let p: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + u * (b - a)).collect();
                ct.pot.v(&p)
            })
            .fold(0.0, f64::max)
            + 1.0
    };
    let mut theta_constants = vec![0.0f64; ct.order + 1];
    let mut vexpv = BTreeMap::new();
    for (t, coupling, x, y) in points {
        let vb = vbar(x, y);
        let pt = ct.lay.point(x, &diff(x, y), *coupling);
        for (j, th) in ct.thetas.iter().enumerate() {
            let norm = th.eval(&pt).norm();
            let denom = vb.powf(kappa_p * j as f64) * coupling.max(1e-300).powi(grading_bound(j) as i32);
            theta_constants[j] = theta_constants[j].max(norm / denom);
        }
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
        let h = ct.h(x, y);
        for a in [0.5, 0.9] {
            for l in [1u32, 2] {
                let val = vb.powi(l as i32)
                    * (-(1.0 - a) * (d2 / (4.0 * t) + t * coupling * coupling * h)).exp()
                    * t.powi(l as i32)
                    * coupling.powi(2 * l as i32);
                let key = ((a * 10.0) as u32, l);
                let e = vexpv.entry(key).or_insert(0.0f64);
                *e = e.max(val);
            }
        }
    }
    BoundProbe {
        theta_constants,
        vexpv_sup: vexpv
            .into_iter()
            .map(|((a10, l), v)| ((a10 as f64 / 10.0, l), v))
            .collect(),
    }
}

/// Trace of `Θ_j(x, x)` per form degree, for reporting.
pub fn diagonal_blocks(ct: &CompiledTheta, j: usize, coupling: f64, x: &[f64]) -> Vec<Vec<f64>> {
    let pt = ct.lay.point(x, &vec![0.0; ct.lay.n], coupling);
    let e = ct.thetas[j].eval(&pt);
    (0..=ct.lay.n).map(|p| e.degree_block_diag(p)).collect()
}

pub fn supertrace_at(ct: &CompiledTheta, j: usize, coupling: f64, x: &[f64], y: &[f64]) -> f64 {
    supertrace(&ct.thetas[j].eval(&ct.lay.point(x, &diff(x, y), coupling)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_real;

    fn table(src: &str, n: usize, k: usize) -> ThetaTable {
        theta_recursion(&parse_real(src, n).unwrap(), k)
    }

    fn lay_poly(src: &str) -> Poly {
        // variables x1, w1, T spelled as x1, x2, x3
        parse_real(src, 3).unwrap()
    }

    #[test]
    fn h_of_quadratic_and_quartic() {
        let tab = table("x1^2/2", 1, 0);
        // (x² + xy + y²)/3 with y = x + w
        assert_eq!(*tab.h(), lay_poly("x1^2 + x1*x2 + x2^2/3"));
        let tab = table("x1^3/3", 1, 0);
        let pot = tab.potential();
        let ct = tab.compile();
        let (x, y): (f64, f64) = (0.7, -1.3);
        let expect = (x.powi(4) + x.powi(3) * y + x * x * y * y + x * y.powi(3) + y.powi(4)) / 5.0;
        assert!((ct.h(&[x], &[y]) - expect).abs() < 1e-13);
        assert!((ct.h(&[x], &[x]) - pot.v(&[x])).abs() < 1e-13);
    }

    #[test]
    fn e0_identity_holds() {
        for (src, n) in [("x1^2/2", 1), ("x1^3/3", 1), ("x1^2*x2 + x2^3/5", 2)] {
            assert!(table(src, n, 0).e0_identity_residual().is_zero(), "{src}");
        }
    }

    #[test]
    fn kernels() {
        assert!((e0_eval(1.0 / (4.0 * PI), &[0.3], &[0.3]).unwrap() - 1.0).abs() < 1e-15);
        let e = e0_eval(1.0, &[0.0], &[2.0]).unwrap();
        assert!((e - (4.0 * PI).powf(-0.5) * (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(e1_eval(0.3, 0.0, 5.0).unwrap(), 1.0);
        assert!(e0_eval(0.0, &[0.0], &[0.0]).is_err());
        assert!(e1_eval(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn first_coefficients_of_oscillator() {
        let tab = table("x1^2/2", 1, 2);
        assert_eq!(*tab.theta(0), EndoPoly::identity(1, 3));
        let ct = tab.compile();
        let blocks = diagonal_blocks(&ct, 1, 1.0, &[0.4]);
        // Θ₁(x, x) = -T A(x): +T on functions, -T on 1-forms
        assert!((blocks[0][0] - 1.0).abs() < 1e-14);
        assert!((blocks[1][0] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn linear_potential_is_exact() {
        let tab = table("2*x1 - 1", 1, 3);
        for j in 1..=3 {
            assert!(tab.theta(j).is_zero(), "j={j}");
        }
        assert!(tab.remainder_brackets().iter().all(|b| b.is_zero()));
        let ct = tab.compile();
        let k = ct.parametrix(3, 0.3, 1.5, &[0.2], &[0.9]).unwrap();
        let exact = e0_eval(0.3, &[0.2], &[0.9]).unwrap() * (-0.3f64 * 2.25 * 4.0).exp();
        assert!((k.get(0, 0) - exact).abs() < 1e-15);
        let d = pde_defect_check(&ct, 0.3, 1.5, &[0.2], &[0.9], 5).unwrap();
        assert!(d.absolute < 1e-10, "{d:?}");
    }

    #[test]
    fn grading() {
        let rep = t_grading(&table("x1^3/3", 1, 3));
        assert!(rep.ok());
        assert_eq!(rep.degrees[0].1, 0);
        assert!(rep.degrees[1].1 <= 1);
        assert!(rep.degrees[3].1 <= 4);
    }

    #[test]
    fn defect_small_for_oscillator() {
        let ct = table("x1^2/2", 1, 2).compile();
        let d = pde_defect_check(&ct, 0.05, 1.0, &[0.0], &[0.4], 5).unwrap();
        assert!(d.defect < 1e-5, "{d:?}");
    }

    #[test]
    fn group_limits() {
        assert_eq!(group_max_j(0), 0);
        assert_eq!(group_max_j(1), 1);
        assert_eq!(group_max_j(2), 3);
    }

    #[test]
    fn expansion_index_density() {
        let tab = table("x1^2/2", 1, 1);
        let ct = tab.compile();
        let g = diagonal_expansion(&tab, &ct, &[0.0]);
        assert_eq!(g[0].value, 0.0);
        let d = index_density_from_expansion(&tab, &ct, &[0.3]).unwrap();
        let expect = PI.powf(-0.5) * (-0.09f64).exp();
        assert!((d - expect).abs() < 1e-14);
        let short = table("x1^2/2 + x2^2/2", 2, 2);
        assert!(matches!(
            index_density_from_expansion(&short, &short.compile(), &[0.0, 0.0]),
            Err(Error::ExponentBeyondOrder { .. })
        ));
    }

    #[test]
    fn doc_round_trip() {
        let tab = table("x1^3/3 - x1", 1, 3);
        let doc = tab.to_doc();
        let json = serde_json::to_string(&doc).unwrap();
        let back: ThetaDoc = serde_json::from_str(&json).unwrap();
        assert_eq!(back, doc);
        let rebuilt = ThetaTable::from_doc(&back).unwrap();
        assert!(rebuilt.same_coefficients(&tab));
        assert_eq!(rebuilt.remainder_brackets(), tab.remainder_brackets());
    }
}
