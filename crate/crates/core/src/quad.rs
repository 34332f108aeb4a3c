//! Quadrature for index integrals, sublevel volumes and tameness probes.
//!
//! Two integrators share one interface: an adaptive tensor Gauss-Legendre
//! cubature on a truncated box and a Monte-Carlo estimator with a
//! product-Gaussian proposal. Both reduce in a fixed order, so results do not
//! depend on the thread count.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::calculus::{grad, hessian, potential_v_complex};
use crate::exterior::{index_density, MAX_DIM};
use crate::gauss::gauss_legendre;
use crate::numerics::loglog_fit;
use crate::par::map_range;
use crate::parse::AnyPoly;
use crate::poly::{format_rational, qi, rational_to_f64, ComplexRational, EvalPoly, EvalPolyC, MultiPoly, Rational};
use crate::potential::Potential;
use crate::weights::WeightData;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadMethod {
    AdaptiveTensor,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    pub method: QuadMethod,
    /// Truncation half-width of the integration box; chosen from the tail
    /// bound when absent. Ignored by Monte-Carlo integrals over all of space.
    pub radius: Option<f64>,
    /// Absolute tolerance on the error estimate.
    pub tol: f64,
    pub samples: usize,
    pub seed: u64,
    /// Evaluation budget of the adaptive integrator.
    pub max_evals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            method: QuadMethod::AdaptiveTensor,
            radius: None,
            tol: 1e-8,
            samples: 1_000_000,
            seed: 1,
            max_evals: 50_000_000,
        }
    }
}

impl QuadConfig {
    pub fn monte_carlo(samples: usize, seed: u64, tol: f64) -> Self {
        Self {
            method: QuadMethod::MonteCarlo,
            samples,
            seed,
            tol,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", self.tol)));
        }
        if let Some(r) = self.radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
            }
        }
        if self.method == QuadMethod::MonteCarlo && self.samples < 2 {
            return Err(Error::InvalidArgument("Monte-Carlo needs at least 2 samples".into()));
        }
        Ok(())
    }
}

/// Integral with its error estimate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadValue {
    pub value: f64,
    pub error_estimate: f64,
    pub method: QuadMethod,
    pub radius: Option<f64>,
    pub evaluations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndexResult {
    pub value: f64,
    pub error_estimate: f64,
    /// Nearest integer, reported only when `residual < 0.1`.
    pub rounded: Option<i64>,
    pub residual: f64,
    pub method: QuadMethod,
    pub radius: Option<f64>,
    pub evaluations: usize,
}

impl IndexResult {
    fn from_value(q: QuadValue) -> Self {
        let nearest = q.value.round();
        let residual = (q.value - nearest).abs();
        Self {
            value: q.value,
            error_estimate: q.error_estimate,
            rounded: (residual < 0.1).then_some(nearest as i64),
            residual,
            method: q.method,
            radius: q.radius,
            evaluations: q.evaluations,
        }
    }
}

/// Real integrand `e^{-V(x)} p(x)` split into its exponent and its
/// polynomial-size factor, so that tails can be bounded.
trait Integrand: Sync {
    fn dim(&self) -> usize;
    fn v(&self, x: &[f64]) -> f64;
    /// `|p(x)|`, used only for tail bounds.
    fn size(&self, x: &[f64]) -> f64;
    fn eval(&self, x: &[f64]) -> f64;
}

// ---------------------------------------------------------------------------
// adaptive tensor cubature

struct Cell {
    lo: Vec<f64>,
    hi: Vec<f64>,
    value: f64,
    err: f64,
}

#[derive(PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(other.1.cmp(&self.1))
    }
}

struct Rules {
    high: (Vec<f64>, Vec<f64>),
    low: (Vec<f64>, Vec<f64>),
}

fn tensor(f: &(dyn Fn(&[f64]) -> f64 + Sync), lo: &[f64], hi: &[f64], rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let d = lo.len();
    let p = rule.0.len();
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    let half: Vec<f64> = (0..d).map(|i| 0.5 * (hi[i] - lo[i])).collect();
    let mid: Vec<f64> = (0..d).map(|i| 0.5 * (hi[i] + lo[i])).collect();
    let jac: f64 = half.iter().product();
    let mut acc = 0.0;
    loop {
        let mut w = 1.0;
        for i in 0..d {
            x[i] = mid[i] + half[i] * rule.0[idx[i]];
            w *= rule.1[idx[i]];
        }
        acc += w * f(&x);
        let mut k = 0;
        loop {
            if k == d {
                return acc * jac;
            }
            idx[k] += 1;
            if idx[k] < p {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn make_cell(f: &(dyn Fn(&[f64]) -> f64 + Sync), rules: &Rules, lo: Vec<f64>, hi: Vec<f64>) -> Cell {
    let a = tensor(f, &lo, &hi, &rules.high);
    let b = tensor(f, &lo, &hi, &rules.low);
    Cell {
        lo,
        hi,
        value: a,
        err: (a - b).abs(),
    }
}

fn split(lo: &[f64], hi: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
    let d = lo.len();
    (0..1usize << d)
        .map(|mask| {
            let mut a = lo.to_vec();
            let mut b = hi.to_vec();
            for i in 0..d {
                let m = 0.5 * (lo[i] + hi[i]);
                if mask >> i & 1 == 1 {
                    a[i] = m;
                } else {
                    b[i] = m;
                }
            }
            (a, b)
        })
        .collect()
}

/// Adaptive cubature of `f` over `[-r, r]^d`; cells are bisected along every
/// axis, worst error first.
pub fn adaptive_box(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    d: usize,
    r: f64,
    tol: f64,
    max_evals: usize,
) -> (f64, f64, usize) {
    let rules = Rules {
        high: gauss_legendre(8),
        low: gauss_legendre(5),
    };
    let per_cell = 8usize.pow(d as u32) + 5usize.pow(d as u32);
    let init = if d <= 2 { 4 } else { 2 };
    let mut starts = vec![(Vec::new(), Vec::new())];
    for _ in 0..d {
        let mut next = Vec::new();
        for (lo, hi) in &starts {
            for k in 0..init {
                let a = -r + 2.0 * r * k as f64 / init as f64;
                let b = -r + 2.0 * r * (k + 1) as f64 / init as f64;
                let mut l: Vec<f64> = lo.clone();
                let mut h: Vec<f64> = hi.clone();
                l.push(a);
                h.push(b);
                next.push((l, h));
            }
        }
        starts = next;
    }
    let mut cells: Vec<Option<Cell>> = map_range(starts.len(), |i| {
        Some(make_cell(f, &rules, starts[i].0.clone(), starts[i].1.clone()))
    });
    let mut evals = cells.len() * per_cell;
    let mut heap: BinaryHeap<Key> = cells
        .iter()
        .enumerate()
        .map(|(i, c)| Key(c.as_ref().map(|c| c.err).unwrap_or(0.0), i))
        .collect();
    let total_err = |cells: &[Option<Cell>]| cells.iter().flatten().map(|c| c.err).sum::<f64>();
    let batch = 8usize;
    while total_err(&cells) > tol && evals + batch * (1 << d) * per_cell <= max_evals {
        let mut parents = Vec::new();
        while parents.len() < batch {
            match heap.pop() {
                Some(Key(_, i)) => parents.push(cells[i].take().expect("live cell")),
                None => break,
            }
        }
        if parents.is_empty() {
            break;
        }
        let boxes: Vec<(Vec<f64>, Vec<f64>)> = parents.iter().flat_map(|c| split(&c.lo, &c.hi)).collect();
        let children = map_range(boxes.len(), |i| make_cell(f, &rules, boxes[i].0.clone(), boxes[i].1.clone()));
        evals += children.len() * per_cell;
        for c in children {
            heap.push(Key(c.err, cells.len()));
            cells.push(Some(c));
        }
    }
    let value = cells.iter().flatten().map(|c| c.value).sum();
    (value, total_err(&cells), evals)
}

// ---------------------------------------------------------------------------
// Monte-Carlo

const BATCH: usize = 1 << 15;

/// Importance-sampled `∫ f` over `ℝ^d` with proposal `Π N(0, σᵢ²)`.
/// Returns `(estimate, standard error)`.
pub fn monte_carlo_gaussian(f: &(dyn Fn(&[f64]) -> f64 + Sync), sigma: &[f64], samples: usize, seed: u64) -> (f64, f64) {
    let d = sigma.len();
    let log_norm: f64 = sigma.iter().map(|s| (s * (2.0 * PI).sqrt()).ln()).sum();
    monte_carlo_batches(samples, seed, |rng| {
        let mut x = vec![0.0; d];
        let mut q = 0.0;
        for i in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            x[i] = sigma[i] * z;
            q += 0.5 * z * z;
        }
        f(&x) * (q + log_norm).exp()
    })
}

/// Uniform `∫ f` over `[-r, r]^d`.
pub fn monte_carlo_box(f: &(dyn Fn(&[f64]) -> f64 + Sync), d: usize, r: f64, samples: usize, seed: u64) -> (f64, f64) {
    let vol = (2.0 * r).powi(d as i32);
    monte_carlo_batches(samples, seed, |rng| {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-r..r)).collect();
        f(&x) * vol
    })
}

fn monte_carlo_batches<G>(samples: usize, seed: u64, g: G) -> (f64, f64)
where
    G: Fn(&mut ChaCha8Rng) -> f64 + Sync + Send,
{
    let batches = samples.div_ceil(BATCH);
    let partial = map_range(batches, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        let count = BATCH.min(samples - b * BATCH);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..count {
            let v = g(&mut rng);
            s += v;
            s2 += v * v;
        }
        (s, s2)
    });
    let (s, s2) = partial.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = samples as f64;
    let mean = s / n;
    let var = ((s2 / n - mean * mean) * n / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

// ---------------------------------------------------------------------------
// truncation and proposals

fn box_boundary(d: usize, r: f64, seed: u64) -> Vec<Vec<f64>> {
    if d == 1 {
        return vec![vec![-r], vec![r]];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // face centres, then uniform points, then points crowded towards the axes
    let mut pts: Vec<Vec<f64>> = (0..2 * d)
        .map(|k| (0..d).map(|i| if i == k / 2 { if k % 2 == 0 { r } else { -r } } else { 0.0 }).collect())
        .collect();
    for s in 0..512 * d {
        let face = rng.random_range(0..d);
        let side = if rng.random_bool(0.5) { r } else { -r };
        pts.push(
            (0..d)
                .map(|i| {
                    if i == face {
                        side
                    } else {
                        let u: f64 = rng.random_range(-1.0..1.0);
                        r * if s % 2 == 0 { u } else { u * u * u }
                    }
                })
                .collect(),
        );
    }
    pts
}

/// Heuristic bound on the integral outside `[-r, r]^d`:
/// `e^{-min V} (1 + max |p|) (2r)^d d` over sampled boundary points.
fn tail_bound(g: &dyn Integrand, r: f64, seed: u64) -> f64 {
    let d = g.dim();
    let pts = box_boundary(d, r, seed);
    let vmin = pts.iter().map(|p| g.v(p)).fold(f64::INFINITY, f64::min);
    let smax = pts.iter().map(|p| g.size(p)).fold(0.0, f64::max);
    (-vmin).exp() * (1.0 + smax) * (2.0 * r).powi(d as i32) * d as f64
}

fn choose_radius(g: &dyn Integrand, cfg: &QuadConfig) -> Result<f64> {
    let target = 0.1 * cfg.tol;
    if let Some(r) = cfg.radius {
        let bound = tail_bound(g, r, cfg.seed);
        if bound > target {
            return Err(Error::TailBound { bound, tol: target });
        }
        return Ok(r);
    }
    let mut r = 1.0;
    loop {
        let bound = tail_bound(g, r, cfg.seed);
        if bound < target {
            return Ok(r);
        }
        r *= 1.25;
        if r > 1e3 {
            return Err(Error::TailBound { bound, tol: target });
        }
    }
}

/// Per-axis proposal widths: the distance along each coordinate axis at
/// which `V` first reaches 1. Under quasi-homogeneity this scales like the
/// weights, which makes the proposal anisotropic in the right way.
fn proposal_widths(g: &dyn Integrand) -> Vec<f64> {
    let d = g.dim();
    (0..d)
        .map(|i| {
            let mut r = 0.05;
            while r < 50.0 {
                let mut p = vec![0.0; d];
                p[i] = r;
                let a = g.v(&p);
                p[i] = -r;
                if a >= 1.0 && g.v(&p) >= 1.0 {
                    break;
                }
                r *= 1.1;
            }
            r.max(0.25)
        })
        .collect()
}

fn integrate(g: &dyn Integrand, cfg: &QuadConfig) -> Result<QuadValue> {
    cfg.validate()?;
    let f = |x: &[f64]| g.eval(x);
    let out = match cfg.method {
        QuadMethod::AdaptiveTensor => {
            let r = choose_radius(g, cfg)?;
            let (value, err, evals) = adaptive_box(&f, g.dim(), r, 0.5 * cfg.tol, cfg.max_evals);
            QuadValue {
                value,
                error_estimate: err + tail_bound(g, r, cfg.seed),
                method: cfg.method,
                radius: Some(r),
                evaluations: evals,
            }
        }
        QuadMethod::MonteCarlo => {
            let sigma = proposal_widths(g);
            let (value, err) = monte_carlo_gaussian(&f, &sigma, cfg.samples, cfg.seed);
            QuadValue {
                value,
                error_estimate: err,
                method: cfg.method,
                radius: None,
                evaluations: cfg.samples,
            }
        }
    };
    if !out.value.is_finite() {
        return Err(Error::NonFinite("integral".into()));
    }
    if out.error_estimate > cfg.tol {
        return Err(Error::ToleranceExceeded {
            estimate: out.error_estimate,
            tol: cfg.tol,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// integrands

struct RealIndex {
    pot: Potential,
    sign: f64,
    via_density: bool,
}

impl RealIndex {
    fn det(&self, x: &[f64]) -> f64 {
        let h = self.pot.hessian(x);
        let n = h.len();
        DMatrix::from_fn(n, n, |i, j| -h[i][j]).determinant()
    }
}

impl Integrand for RealIndex {
    fn dim(&self) -> usize {
        self.pot.n()
    }
    fn v(&self, x: &[f64]) -> f64 {
        self.pot.v(x)
    }
    fn size(&self, x: &[f64]) -> f64 {
        self.det(x).abs()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        if self.via_density {
            index_density(&self.pot.hessian(x), self.pot.v(x), None).unwrap_or(f64::NAN)
        } else {
            self.sign * (-self.pot.v(x)).exp() * self.det(x)
        }
    }
}

struct ComplexIndex {
    n: usize,
    v: EvalPoly,
    hess: Vec<Vec<EvalPolyC>>,
    norm: f64,
}

impl ComplexIndex {
    fn new(w: &MultiPoly<ComplexRational>) -> Self {
        let n = w.nvars();
        Self {
            n,
            v: potential_v_complex(w).compile(),
            hess: hessian(w).iter().map(|r| r.iter().map(|p| p.compile()).collect()).collect(),
            norm: PI.powi(-(n as i32)),
        }
    }

    fn det2(&self, x: &[f64]) -> f64 {
        let z: Vec<Complex64> = x.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
        let m = DMatrix::from_fn(self.n, self.n, |i, j| self.hess[i][j].eval(&z));
        m.determinant().norm_sqr()
    }
}

impl Integrand for ComplexIndex {
    fn dim(&self) -> usize {
        2 * self.n
    }
    fn v(&self, x: &[f64]) -> f64 {
        self.v.eval(x)
    }
    fn size(&self, x: &[f64]) -> f64 {
        self.det2(x)
    }
    fn eval(&self, x: &[f64]) -> f64 {
        self.norm * (-self.v.eval(x)).exp() * self.det2(x)
    }
}

struct Moment {
    v: EvalPoly,
    d: usize,
    k: f64,
}

impl Integrand for Moment {
    fn dim(&self) -> usize {
        self.d
    }
    fn v(&self, x: &[f64]) -> f64 {
        self.v.eval(x)
    }
    fn size(&self, x: &[f64]) -> f64 {
        self.v.eval(x).max(0.0).powf(0.5 * self.k)
    }
    fn eval(&self, x: &[f64]) -> f64 {
        let v = self.v.eval(x).max(0.0);
        (-v).exp() * v.powf(0.5 * self.k)
    }
}

fn v_of(f: &AnyPoly) -> (EvalPoly, usize) {
    match f {
        AnyPoly::Real(p) => (Potential::new(p).v_poly().compile(), p.nvars()),
        AnyPoly::Complex(w) => (potential_v_complex(w).compile(), 2 * w.nvars()),
    }
}

// ---------------------------------------------------------------------------
// public operations

fn check_real_dim(n: usize) -> Result<()> {
    if n == 0 || n > MAX_DIM {
        return Err(Error::InvalidArgument(format!("dimension must be in 1..={MAX_DIM}, got {n}")));
    }
    Ok(())
}

/// `(-1)^n π^{-n/2} ∫ e^{-|∇f|²} det(-∇²f)`.
pub fn index_real(f: &MultiPoly<Rational>, cfg: &QuadConfig) -> Result<IndexResult> {
    check_real_dim(f.nvars())?;
    let n = f.nvars();
    let g = RealIndex {
        pot: Potential::new(f),
        sign: if n.is_multiple_of(2) { 1.0 } else { -1.0 } * PI.powf(-(n as f64) / 2.0),
        via_density: false,
    };
    integrate(&g, cfg).map(IndexResult::from_value)
}

/// The same index with the integrand taken from the Berezin-integral local
/// index density; an independent code path for cross-checks.
pub fn index_real_via_density(f: &MultiPoly<Rational>, cfg: &QuadConfig) -> Result<IndexResult> {
    check_real_dim(f.nvars())?;
    let g = RealIndex {
        pot: Potential::new(f),
        sign: 1.0,
        via_density: true,
    };
    integrate(&g, cfg).map(IndexResult::from_value)
}

/// `π^{-n} ∫_{ℂⁿ} e^{-|∂W|²} |det ∂²W|²`; equals the Milnor number for a
/// nondegenerate quasi-homogeneous `W`. The Euler characteristic of the
/// twisted Dolbeault complex is `(-1)^n` times this value.
pub fn index_complex(w: &MultiPoly<ComplexRational>, cfg: &QuadConfig) -> Result<IndexResult> {
    if w.nvars() == 0 || 2 * w.nvars() > 2 * MAX_DIM {
        return Err(Error::InvalidArgument(format!("unsupported number of variables {}", w.nvars())));
    }
    integrate(&ComplexIndex::new(w), cfg).map(IndexResult::from_value)
}

/// `∫ e^{-|∇f|²} |∇f|^k`.
pub fn gaussian_moment(f: &AnyPoly, k: f64, cfg: &QuadConfig) -> Result<QuadValue> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::InvalidArgument(format!("moment order must be nonnegative, got {k}")));
    }
    let (v, d) = v_of(f);
    integrate(&Moment { v, d, k }, cfg)
}

/// Half-width of a box containing `{V ≤ λ}`, judged on sampled box faces.
fn sublevel_radius(v: &EvalPoly, d: usize, lambda: f64, seed: u64) -> Result<f64> {
    let mut r = 0.01f64.max(lambda.abs().sqrt() * 1e-3);
    loop {
        let vmin = box_boundary(d, r, seed).iter().map(|p| v.eval(p)).fold(f64::INFINITY, f64::min);
        if vmin > lambda {
            return Ok(r);
        }
        r *= 1.1;
        if r > 1e4 {
            return Err(Error::InvalidArgument("sublevel set appears unbounded".into()));
        }
    }
}

/// Monte-Carlo volume of `K_λ = {|∇f|² ≤ λ}`.
pub fn vol_sublevel(f: &AnyPoly, lambda: f64, cfg: &QuadConfig) -> Result<QuadValue> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("λ must be positive, got {lambda}")));
    }
    let (v, d) = v_of(f);
    let r = sublevel_radius(&v, d, lambda, cfg.seed)?;
    let ind = |x: &[f64]| if v.eval(x) <= lambda { 1.0 } else { 0.0 };
    let (value, err) = monte_carlo_box(&ind, d, r, cfg.samples.max(2), cfg.seed);
    Ok(QuadValue {
        value,
        error_estimate: err,
        method: QuadMethod::MonteCarlo,
        radius: Some(r),
        evaluations: cfg.samples,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AlphaReport {
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub alpha: f64,
    pub constant: f64,
    /// `α̂ ≥ d/2 - 0.1` with `d` the real dimension.
    pub admissible: bool,
}

/// Monte-Carlo `I(λ) = ∫_{V ≤ λ} (λ - V)^{d/2}` and the log-log slope `α̂`.
pub fn alpha_probe(f: &AnyPoly, lambdas: &[f64], cfg: &QuadConfig) -> Result<AlphaReport> {
    if lambdas.len() < 3 || lambdas.windows(2).any(|w| !(w[0] < w[1])) || !(lambdas[0] > 0.0) {
        return Err(Error::InvalidArgument("need at least 3 increasing positive λ values".into()));
    }
    let (v, d) = v_of(f);
    let half = 0.5 * d as f64;
    let mut values = Vec::new();
    let mut errors = Vec::new();
    for (i, &lambda) in lambdas.iter().enumerate() {
        let r = sublevel_radius(&v, d, lambda, cfg.seed)?;
        let g = |x: &[f64]| (lambda - v.eval(x)).max(0.0).powf(half);
        let (val, err) = monte_carlo_box(&g, d, r, cfg.samples.max(2), cfg.seed.wrapping_add(i as u64));
        values.push(val);
        errors.push(err);
    }
    let (constant, alpha) = loglog_fit(lambdas, &values).ok_or(Error::EmptyBand)?;
    Ok(AlphaReport {
        lambdas: lambdas.to_vec(),
        values,
        errors,
        alpha,
        constant,
        admissible: alpha >= half - 0.1,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FjrReport {
    pub gammas: Vec<f64>,
    /// Per coordinate, `sup |uᵢ| / (Σ|∂ⱼW| + 1)^{γᵢ}` on the unit sphere.
    pub sphere_sup: Vec<f64>,
    /// The same supremum over all samples.
    pub sample_sup: Vec<f64>,
    pub samples: usize,
    /// Every sample supremum is below ten times its unit-sphere value.
    pub bounded: bool,
}

/// Empirical constant in `|uᵢ| ≤ C (Σⱼ |∂ⱼW(u)| + 1)^{γᵢ}` over points with
/// log-uniform radii in `[1e-3, 1e3]`.
pub fn fjr_probe(w: &MultiPoly<ComplexRational>, weights: &WeightData, cfg: &QuadConfig) -> Result<FjrReport> {
    let n = w.nvars();
    let gammas: Vec<f64> = weights
        .gammas
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("exponents γ undefined when a weight equals 1".into()))?
        .iter()
        .map(rational_to_f64)
        .collect();
    if gammas.len() != n {
        return Err(Error::InvalidArgument("weights do not match the number of variables".into()));
    }
    let dw: Vec<EvalPolyC> = grad(w).iter().map(|p| p.compile()).collect();
    let ratios = |u: &[Complex64]| -> Vec<f64> {
        let s: f64 = dw.iter().map(|d| d.eval(u).norm()).sum::<f64>() + 1.0;
        (0..n).map(|i| u[i].norm() / s.powf(gammas[i])).collect()
    };
    let direction = |rng: &mut ChaCha8Rng| -> Vec<Complex64> {
        loop {
            let v: Vec<f64> = (0..2 * n).map(|_| rng.sample(StandardNormal)).collect();
            let r = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if r > 1e-12 {
                return v.chunks(2).map(|c| Complex64::new(c[0] / r, c[1] / r)).collect();
            }
        }
    };
    let samples = cfg.samples.clamp(1000, 2_000_000);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sphere_sup = vec![0.0f64; n];
    let mut sample_sup = vec![0.0f64; n];
    for _ in 0..samples.min(20_000) {
        let u = direction(&mut rng);
        for (s, r) in sphere_sup.iter_mut().zip(ratios(&u)) {
            *s = s.max(r);
        }
    }
    for _ in 0..samples {
        let u = direction(&mut rng);
        let radius = 10f64.powf(rng.random_range(-3.0..3.0));
        let u: Vec<Complex64> = u.iter().map(|c| c * radius).collect();
        for (s, r) in sample_sup.iter_mut().zip(ratios(&u)) {
            *s = s.max(r);
        }
    }
    let bounded = sample_sup.iter().zip(&sphere_sup).all(|(a, b)| a.is_finite() && *a < 10.0 * b);
    Ok(FjrReport {
        gammas,
        sphere_sup,
        sample_sup,
        samples,
        bounded,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ExponentEntry {
    pub j: u32,
    pub l: u32,
    /// `Σ |αⁱ|`
    pub s: u32,
    pub exponent: String,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExponentTable {
    pub q: String,
    pub delta: String,
    /// `-2nδq`, relative to the `(4πt)^{-n}` prefactor.
    pub leading: String,
    pub leading_value: f64,
    pub entries: Vec<ExponentEntry>,
}

fn common_weight(w: &WeightData) -> Result<(Rational, Rational)> {
    if !w.is_homogeneous() {
        return Err(Error::NonHomogeneous);
    }
    let delta = w
        .delta
        .clone()
        .ok_or_else(|| Error::InvalidArgument("δ undefined when the weight equals 1".into()))?;
    Ok((w.q[0].clone(), delta))
}

/// Exponents `j + δq s - δl - 2nδq` for `j ≤ j_max`, `l ≤ j`, `s ≤ 2j`,
/// with `n` complex variables of common weight `q` and `δ = 1/(2(1-q))`.
pub fn homogeneous_exponents(w: &WeightData, j_max: u32) -> Result<ExponentTable> {
    let (q, delta) = common_weight(w)?;
    let n = qi(w.q.len() as i64);
    let dq = &delta * &q;
    let leading = -(qi(2) * &n * &dq);
    let mut entries = Vec::new();
    for j in 0..=j_max {
        for l in 0..=j {
            for s in 0..=2 * j {
                let e = qi(j as i64) + &dq * qi(s as i64) - &delta * qi(l as i64) + &leading;
                entries.push(ExponentEntry {
                    j,
                    l,
                    s,
                    value: rational_to_f64(&e),
                    exponent: format_rational(&e),
                });
            }
        }
    }
    Ok(ExponentTable {
        q: format_rational(&q),
        delta: format_rational(&delta),
        leading_value: rational_to_f64(&leading),
        leading: format_rational(&leading),
        entries,
    })
}

impl ExponentTable {
    /// Whether `e` has the form `j + δq s - δl - 2nδq` with integers in range.
    pub fn contains(&self, e: f64) -> bool {
        self.entries.iter().any(|x| (x.value - e).abs() < 1e-12)
    }
}

/// Leading small-`t` power of `Tr e^{-t□}` for a real homogeneous `f` in
/// `n` variables of weight `q`: `-n/2 - nδq`.
pub fn real_trace_exponent(w: &WeightData) -> Result<Rational> {
    let (q, delta) = common_weight(w)?;
    let n = qi(w.q.len() as i64);
    Ok(-(&n / qi(2)) - &n * &delta * &q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_complex, parse_real};
    use crate::weights::quasi_weights;

    fn real(src: &str, n: usize) -> MultiPoly<Rational> {
        parse_real(src, n).unwrap()
    }

    #[test]
    fn one_dimensional_indices() {
        let cfg = QuadConfig::default();
        for (src, want, tol) in [("x^2/2", 1.0, 1e-6), ("x^3/3", 0.0, 1e-6), ("x^4/4", 1.0, 1e-4)] {
            let r = index_real(&real(src, 1), &cfg).unwrap();
            assert!((r.value - want).abs() < tol, "{src}: {r:?}");
            assert_eq!(r.rounded, Some(want as i64));
        }
    }

    #[test]
    fn density_path_agrees() {
        let cfg = QuadConfig::default();
        let f = real("x1^2/2 + x2^4/4 + x1*x2/3", 2);
        let a = index_real(&f, &cfg).unwrap();
        let b = index_real_via_density(&f, &cfg).unwrap();
        assert!((a.value - b.value).abs() < 1e-7, "{a:?} {b:?}");
    }

    #[test]
    fn complex_monomials() {
        let cfg = QuadConfig {
            tol: 1e-6,
            ..QuadConfig::default()
        };
        for k in 2..=5 {
            let w = parse_complex(&format!("z^{k}"), 1).unwrap();
            let r = index_complex(&w, &cfg).unwrap();
            assert!((r.value - (k - 1) as f64).abs() < 1e-3, "k={k}: {r:?}");
        }
    }

    #[test]
    fn gaussian_moments() {
        let cfg = QuadConfig::default();
        let f = AnyPoly::Real(real("x^2/2", 1));
        let m0 = gaussian_moment(&f, 0.0, &cfg).unwrap().value;
        let m2 = gaussian_moment(&f, 2.0, &cfg).unwrap().value;
        assert!((m0 - PI.sqrt()).abs() < 1e-6);
        assert!((m2 - PI.sqrt() / 2.0).abs() < 1e-6);
        let g = AnyPoly::Real(real("x^3/3", 1));
        // Γ(1/4)/2
        let want = 1.812_804_954_110_954;
        assert!((gaussian_moment(&g, 0.0, &cfg).unwrap().value - want).abs() < 1e-5);
    }

    #[test]
    fn sublevel_and_alpha() {
        let cfg = QuadConfig::monte_carlo(200_000, 3, 1e-2);
        let f = AnyPoly::Real(real("x^2/2", 1));
        let v = vol_sublevel(&f, 4.0, &cfg).unwrap();
        assert!((v.value - 4.0).abs() < 5.0 * v.error_estimate + 1e-3, "{v:?}");
        let a = alpha_probe(&f, &[1.0, 2.0, 4.0, 8.0, 16.0], &cfg).unwrap();
        assert!((a.alpha - 1.0).abs() < 0.05 && a.admissible, "{a:?}");
        assert!((a.constant - PI / 2.0).abs() < 0.05);
    }

    #[test]
    fn monte_carlo_is_reproducible_and_scales() {
        let w = parse_complex("z^3", 1).unwrap();
        let cfg = QuadConfig::monte_carlo(1 << 17, 9, 1.0);
        let a = index_complex(&w, &cfg).unwrap();
        let b = index_complex(&w, &cfg).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        let c = index_complex(&w, &QuadConfig::monte_carlo(1 << 18, 9, 1.0)).unwrap();
        let ratio = a.error_estimate / c.error_estimate;
        assert!((ratio - 2f64.sqrt()).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn fjr_and_exponents() {
        let w = parse_complex("z^3", 1).unwrap();
        let wd = quasi_weights(&w).unwrap();
        let cfg = QuadConfig {
            samples: 20_000,
            ..QuadConfig::default()
        };
        let r = fjr_probe(&w, &wd, &cfg).unwrap();
        assert!(r.bounded && r.sample_sup[0] < 1.0 / 3f64.sqrt() + 1e-6, "{r:?}");
        let t = homogeneous_exponents(&wd, 2).unwrap();
        assert_eq!(t.delta, "3/4");
        assert_eq!(t.leading, "-1/2");
        assert!(t.contains(-0.5) && !t.contains(0.1));
        let fx = quasi_weights(&real("x^3/3", 1)).unwrap();
        assert_eq!(real_trace_exponent(&fx).unwrap(), qi(-3) / qi(4));
        let mixed = quasi_weights(&parse_complex("z1^3 + z2^2", 2).unwrap()).unwrap();
        assert_eq!(homogeneous_exponents(&mixed, 1).unwrap_err(), Error::NonHomogeneous);
    }

    #[test]
    fn non_tame_direction_is_rejected() {
        let cfg = QuadConfig::default();
        let r = index_real(&real("x1^2/2", 2), &cfg);
        assert!(matches!(r, Err(Error::TailBound { .. })), "{r:?}");
    }
}
