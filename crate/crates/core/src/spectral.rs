//! Finite-difference spectra of the one-dimensional deformed Laplacian.
//!
//! On functions `□ = -∂² + T²f'² - T f''`, on 1-forms `□ = -∂² + T²f'² + T f''`.
//! Both are discretised with the three-point stencil on `[-L, L]` with
//! Dirichlet ends, giving symmetric tridiagonal matrices on the interior nodes.

use serde::Serialize;

use crate::action::{agmon_distance, ActionOptions};
use crate::gauss::{gauss_hermite, gauss_legendre};
use crate::numerics::loglog_fit;
use crate::par::map_range;
use crate::parametrix::{diagonal_expansion, theta_recursion, CompiledTheta};
use crate::poly::{MultiPoly, Rational};
use crate::potential::Potential;
use crate::{Error, Result};

/// Uniform grid with `points` nodes on `[-half_width, half_width]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub half_width: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidArgument(format!("grid half-width must be positive, got {half_width}")));
        }
        if points < 5 {
            return Err(Error::InvalidArgument(format!("grid needs at least 5 points, got {points}")));
        }
        Ok(Self { half_width, points })
    }

    /// Grid with spacing close to `h` whose half-width covers the region where
    /// the sector potentials stay below `ceiling`.
    pub fn auto(pot: &Potential, coupling: f64, ceiling: f64, h: f64) -> Result<Self> {
        check_1d(pot)?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!("grid spacing must be positive, got {h}")));
        }
        let mut l = 1.0f64;
        while boundary_floor_at(pot, coupling, l) < ceiling {
            l *= 1.1;
            if l > 1e4 {
                return Err(Error::InvalidArgument(
                    "potential does not confine: no grid reaches the requested ceiling".into(),
                ));
            }
        }
        let m = (l / h).ceil() as usize;
        Grid::new(m as f64 * h, 2 * m + 1)
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    /// Number of unknowns (interior nodes).
    pub fn interior(&self) -> usize {
        self.points - 2
    }

    /// Position of interior node `i`.
    pub fn node(&self, i: usize) -> f64 {
        -self.half_width + (i + 1) as f64 * self.h()
    }

    /// Interior node closest to `x`.
    pub fn nearest(&self, x: f64) -> Option<usize> {
        let pos = ((x + self.half_width) / self.h()).round();
        if pos < 1.0 || pos > (self.points - 2) as f64 {
            None
        } else {
            Some(pos as usize - 1)
        }
    }

    /// Same interval, spacing halved; interior node `i` maps to `2i + 1`.
    pub fn refined(&self) -> Grid {
        Grid {
            half_width: self.half_width,
            points: 2 * self.points - 1,
        }
    }
}

fn check_1d(pot: &Potential) -> Result<()> {
    if pot.n() != 1 {
        return Err(Error::InvalidArgument(format!(
            "one-dimensional spectra need a polynomial in one variable, got {}",
            pot.n()
        )));
    }
    Ok(())
}

fn sector_potential(pot: &Potential, coupling: f64, degree: usize, x: f64) -> f64 {
    let d1 = pot.grad(&[x])[0];
    let d2 = pot.hessian(&[x])[0][0];
    let sign = if degree == 0 { -1.0 } else { 1.0 };
    coupling * coupling * d1 * d1 + sign * coupling * d2
}

fn boundary_floor_at(pot: &Potential, coupling: f64, l: f64) -> f64 {
    [-l, l]
        .iter()
        .flat_map(|&x| [0, 1].map(|d| sector_potential(pot, coupling, d, x)))
        .fold(f64::INFINITY, f64::min)
}

/// Smallest sector potential at the two ends; eigenvalues well below it are
/// insensitive to the truncation.
pub fn boundary_floor(pot: &Potential, coupling: f64, grid: &Grid) -> f64 {
    boundary_floor_at(pot, coupling, grid.half_width)
}

/// Symmetric tridiagonal matrix with constant off-diagonal.
#[derive(Clone, Debug)]
pub struct Tridiag {
    pub diag: Vec<f64>,
    pub off: f64,
}

impl Tridiag {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let m = self.len();
        (0..m)
            .map(|i| {
                let mut s = self.diag[i] * v[i];
                if i > 0 {
                    s += self.off * v[i - 1];
                }
                if i + 1 < m {
                    s += self.off * v[i + 1];
                }
                s
            })
            .collect()
    }

    pub fn rayleigh(&self, v: &[f64]) -> f64 {
        let av = self.apply(v);
        let num: f64 = av.iter().zip(v).map(|(a, b)| a * b).sum();
        let den: f64 = v.iter().map(|a| a * a).sum();
        num / den
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn sturm_count(&self, x: f64) -> usize {
        let e2 = self.off * self.off;
        let mut count = 0;
        let mut q = 1.0;
        for (i, &d) in self.diag.iter().enumerate() {
            q = if i == 0 { d - x } else { d - x - e2 / q };
            if q == 0.0 {
                q = -f64::EPSILON * (d.abs() + self.off.abs() + x.abs()).max(f64::MIN_POSITIVE);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let r = 2.0 * self.off.abs();
        let lo = self.diag.iter().cloned().fold(f64::INFINITY, f64::min) - r;
        let hi = self.diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + r;
        (lo, hi)
    }

    /// `k`-th smallest eigenvalue (0-based) by bisection on the Sturm count.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.sturm_count(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvector for an accurate eigenvalue `lambda`, from the two inward
    /// recurrences joined at the index with the smallest twisted pivot.
    /// Tails are resolved componentwise rather than to the norm of the vector.
    pub fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let m = self.len();
        let e = self.off;
        if m == 1 {
            return vec![1.0];
        }
        let sweep = |order: &mut dyn Iterator<Item = usize>| -> Vec<f64> {
            let idx: Vec<usize> = order.collect();
            let mut v = vec![0.0; m];
            v[idx[0]] = 1.0;
            let mut prev = 0.0;
            for s in 0..m - 1 {
                let i = idx[s];
                let next = -((self.diag[i] - lambda) * v[i] + e * prev) / e;
                prev = v[i];
                v[idx[s + 1]] = next;
                if next.abs() > 1e100 {
                    for &j in &idx[..=s + 1] {
                        v[j] *= 1e-100;
                    }
                    prev *= 1e-100;
                }
            }
            v
        };
        let l = sweep(&mut (0..m));
        let r = sweep(&mut (0..m).rev());
        let mut best = (f64::INFINITY, 0usize);
        for k in 0..m {
            if l[k] == 0.0 || r[k] == 0.0 {
                continue;
            }
            let left = if k > 0 { l[k - 1] / l[k] } else { 0.0 };
            let right = if k + 1 < m { r[k + 1] / r[k] } else { 0.0 };
            let gamma = (self.diag[k] - lambda + e * (left + right)).abs();
            if gamma < best.0 {
                best = (gamma, k);
            }
        }
        let k = best.1;
        let mut v: Vec<f64> = (0..m)
            .map(|i| if i <= k { l[i] / l[k] } else { r[i] / r[k] })
            .collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
        v
    }

    /// Inverse iteration with a shifted tridiagonal solve, orthogonalised
    /// against `against`. Used inside tight clusters.
    fn inverse_iteration(&self, lambda: f64, against: &[Vec<f64>]) -> Vec<f64> {
        let m = self.len();
        let shift = lambda + 1e-10 * (1.0 + lambda.abs());
        let mut v: Vec<f64> = (0..m).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
        for _ in 0..4 {
            for u in against {
                let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
            }
            v = thomas(&self.diag, self.off, shift, &v);
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.iter_mut().for_each(|a| *a /= norm);
        }
        for u in against {
            let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
        v
    }
}

fn thomas(diag: &[f64], off: f64, shift: f64, rhs: &[f64]) -> Vec<f64> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut b = diag[0] - shift;
    if b == 0.0 {
        b = f64::EPSILON;
    }
    c[0] = off / b;
    d[0] = rhs[0] / b;
    for i in 1..m {
        let mut den = diag[i] - shift - off * c[i - 1];
        if den == 0.0 {
            den = f64::EPSILON;
        }
        c[i] = off / den;
        d[i] = (rhs[i] - off * d[i - 1]) / den;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = d[m - 1];
    for i in (0..m - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Assembles `□` on form degree `degree ∈ {0, 1}`.
pub fn assemble(pot: &Potential, coupling: f64, grid: &Grid, degree: usize) -> Result<Tridiag> {
    check_1d(pot)?;
    if degree > 1 {
        return Err(Error::InvalidArgument(format!("form degree must be 0 or 1, got {degree}")));
    }
    if !coupling.is_finite() {
        return Err(Error::NonFinite("coupling".into()));
    }
    let h = grid.h();
    let diag: Vec<f64> = (0..grid.interior())
        .map(|i| 2.0 / (h * h) + sector_potential(pot, coupling, degree, grid.node(i)))
        .collect();
    if diag.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("assembled diagonal".into()));
    }
    Ok(Tridiag {
        diag,
        off: -1.0 / (h * h),
    })
}

/// Lowest eigenpairs of one form-degree sector. Eigenvectors are normalised
/// so that `h Σ φ_i² = 1` and are nonnegative at their largest entry.
#[derive(Clone, Debug, Serialize)]
pub struct SpectrumResult {
    pub degree: usize,
    pub coupling: f64,
    pub grid: Grid,
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<f64>>,
}

fn cluster_gap(lambda: f64) -> f64 {
    1e-9 * (1.0 + lambda.abs())
}

fn eigenpairs(op: &Tridiag, grid: &Grid, count: usize, vectors: bool) -> (Vec<f64>, Vec<Vec<f64>>) {
    let count = count.min(op.len());
    let values = map_range(count, |k| op.eigenvalue(k));
    if !vectors {
        return (values, Vec::new());
    }
    let scale = grid.h().sqrt();
    let mut vecs = map_range(count, |k| op.eigenvector(values[k]));
    for k in 1..count {
        if values[k] - values[k - 1] < cluster_gap(values[k]) {
            let start = (0..k).rev().take_while(|&j| values[j + 1] - values[j] < cluster_gap(values[k])).last().unwrap_or(k - 1);
            let against: Vec<Vec<f64>> = vecs[start..k].to_vec();
            vecs[k] = op.inverse_iteration(values[k], &against);
        }
    }
    for v in &mut vecs {
        let peak = v.iter().cloned().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        let sign = if peak < 0.0 { -1.0 } else { 1.0 };
        v.iter_mut().for_each(|a| *a *= sign / scale);
    }
    (values, vecs)
}

/// Lowest `count` eigenpairs of sector `degree`.
pub fn eigen_solve(pot: &Potential, coupling: f64, grid: &Grid, degree: usize, count: usize) -> Result<SpectrumResult> {
    let op = assemble(pot, coupling, grid, degree)?;
    let (eigenvalues, eigenvectors) = eigenpairs(&op, grid, count, true);
    Ok(SpectrumResult {
        degree,
        coupling,
        grid: *grid,
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvalues extrapolated from the grid and its refinement,
/// `(4 λ_{h/2} - λ_h) / 3`.
pub fn eigenvalues_richardson(pot: &Potential, coupling: f64, grid: &Grid, degree: usize, count: usize) -> Result<Vec<f64>> {
    let coarse = assemble(pot, coupling, grid, degree)?;
    let fine = assemble(pot, coupling, &grid.refined(), degree)?;
    let (a, _) = eigenpairs(&coarse, grid, count, false);
    let (b, _) = eigenpairs(&fine, &grid.refined(), count, false);
    Ok(a.iter().zip(&b).map(|(c, f)| (4.0 * f - c) / 3.0).collect())
}

/// Eigenpairs of sector `degree` until `k e^{-t_min λ_k} < tol`.
pub fn spectrum_for_trace(
    pot: &Potential,
    coupling: f64,
    grid: &Grid,
    degree: usize,
    t_min: f64,
    tol: f64,
    vectors: bool,
) -> Result<SpectrumResult> {
    if !(t_min > 0.0 && t_min.is_finite()) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t_min}")));
    }
    let op = assemble(pot, coupling, grid, degree)?;
    let ceiling = boundary_floor(pot, coupling, grid);
    let (lo, hi) = op.gershgorin();
    // smallest λ* with e^{-t λ*} (1 + count(λ*)) < tol, found by doubling
    let mut cut = lo.max(0.0) + (1.0 / tol).ln() / t_min;
    loop {
        let k = op.sturm_count(cut);
        if (k as f64 + 1.0) * (-t_min * cut).exp() < tol || cut > hi {
            break;
        }
        cut += (k as f64 + 1.0).ln() / t_min;
    }
    let count = op.sturm_count(cut) + 1;
    let bound = count as f64 * (-t_min * cut).exp();
    if cut > ceiling || count > op.len() {
        return Err(Error::TailBound {
            bound: count as f64 * (-t_min * ceiling.max(lo)).exp(),
            tol,
        });
    }
    debug_assert!(bound < tol || cut > hi);
    let (eigenvalues, eigenvectors) = eigenpairs(&op, grid, count, vectors);
    Ok(SpectrumResult {
        degree,
        coupling,
        grid: *grid,
        eigenvalues,
        eigenvectors,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HeatTrace {
    pub t: f64,
    pub trace0: f64,
    pub trace1: f64,
    pub supertrace: f64,
}

fn tail(spec: &SpectrumResult, t: f64) -> f64 {
    match spec.eigenvalues.last() {
        Some(&l) => spec.eigenvalues.len() as f64 * (-t * l).exp(),
        None => f64::INFINITY,
    }
}

/// `Tr e^{-t□}` per sector and the supertrace, refusing truncated sums whose
/// tail bound `k e^{-t λ_k}` reaches `tol`.
pub fn heat_trace(s0: &SpectrumResult, s1: &SpectrumResult, t: f64, tol: f64) -> Result<HeatTrace> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    let bound = tail(s0, t).max(tail(s1, t));
    if !(bound < tol) {
        return Err(Error::TailBound { bound, tol });
    }
    let sum = |s: &SpectrumResult| s.eigenvalues.iter().map(|l| (-t * l).exp()).sum::<f64>();
    let (a, b) = (sum(s0), sum(s1));
    Ok(HeatTrace {
        t,
        trace0: a,
        trace1: b,
        supertrace: a - b,
    })
}

/// `#{k : λ_k ≤ lambda}`.
pub fn counting(spec: &SpectrumResult, lambda: f64) -> usize {
    spec.eigenvalues.iter().filter(|&&l| l <= lambda).count()
}

/// Power-law fit `λ_k ≈ C k^p` over the 0-based indices `band.0..band.1`,
/// skipping `k = 0` and nonpositive eigenvalues. Returns `(C, p)`.
pub fn weyl_fit(spec: &SpectrumResult, band: (usize, usize)) -> Result<(f64, f64)> {
    let hi = band.1.min(spec.eigenvalues.len());
    let (ks, ls): (Vec<f64>, Vec<f64>) = (band.0.max(1)..hi)
        .filter(|&k| spec.eigenvalues[k] > 0.0)
        .map(|k| (k as f64, spec.eigenvalues[k]))
        .unzip();
    if ks.len() < 2 {
        return Err(Error::EmptyBand);
    }
    loglog_fit(&ks, &ls).ok_or(Error::EmptyBand)
}

/// Nonzero eigenvalues of the two sectors paired in order; returns the largest
/// relative mismatch `|λ⁰ - λ¹| / max(1, λ⁰)` over the first `pairs` pairs.
pub fn susy_pairing(s0: &SpectrumResult, s1: &SpectrumResult, pairs: usize, zero_tol: f64) -> Result<f64> {
    let nz = |s: &SpectrumResult| -> Vec<f64> { s.eigenvalues.iter().cloned().filter(|l| l.abs() > zero_tol).collect() };
    let (a, b) = (nz(s0), nz(s1));
    if a.len() < pairs || b.len() < pairs {
        return Err(Error::InvalidArgument(format!(
            "need {pairs} nonzero eigenvalues per sector, have {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter()
        .zip(&b)
        .take(pairs)
        .map(|(x, y)| (x - y).abs() / x.abs().max(1.0))
        .fold(0.0, f64::max))
}

#[derive(Clone, Debug, Serialize)]
pub struct AgmonDecayReport {
    pub mode: usize,
    pub eigenvalue: f64,
    pub a: f64,
    pub sup: f64,
    pub argmax: f64,
    /// Largest weighted value on the outer tenth of the grid.
    pub edge: f64,
    pub interior: bool,
}

/// `sup_x |φ_mode(x)| e^{a ρ(x)}` with `ρ` the Agmon distance to the
/// classically allowed set for the metric `(T²V - λ)₊ dx²`.
pub fn agmon_decay_check(pot: &Potential, spec: &SpectrumResult, mode: usize, a: f64) -> Result<AgmonDecayReport> {
    let phi = spec
        .eigenvectors
        .get(mode)
        .ok_or_else(|| Error::InvalidArgument(format!("mode {mode} not computed")))?;
    let grid = spec.grid;
    let lambda = spec.eigenvalues[mode];
    let t = spec.coupling;
    if t == 0.0 {
        return Err(Error::InvalidArgument("Agmon check needs a nonzero coupling".into()));
    }
    let level = lambda / (t * t);
    let m = grid.interior();
    let xs: Vec<f64> = (0..m).map(|i| grid.node(i)).collect();
    let allowed: Vec<usize> = (0..m).filter(|&i| pot.v(&[xs[i]]) <= level).collect();
    let anchor = match allowed.is_empty() {
        true => {
            let i = (0..m)
                .min_by(|&i, &j| pot.v(&[xs[i]]).total_cmp(&pot.v(&[xs[j]])))
                .unwrap_or(0);
            vec![i]
        }
        false => allowed,
    };
    let (first, last) = (anchor[0], *anchor.last().unwrap_or(&anchor[0]));
    let opts = ActionOptions {
        segments: 256,
        ..ActionOptions::default()
    };
    let level_eff = level.max(0.0);
    let rho: Vec<f64> = map_range(m, |i| {
        let from = if i < first {
            first
        } else if i > last {
            last
        } else {
            return 0.0;
        };
        agmon_distance(pot, level_eff, &[xs[from]], &[xs[i]], opts)
            .map(|d| t.abs() * d.value)
            .unwrap_or(f64::INFINITY)
    });
    let weighted: Vec<f64> = (0..m).map(|i| phi[i].abs() * (a * rho[i]).exp()).collect();
    let (imax, sup) = weighted
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |acc, (i, &w)| if w > acc.1 { (i, w) } else { acc });
    let edge_from = (0.9 * grid.half_width).abs();
    let edge = (0..m)
        .filter(|&i| xs[i].abs() >= edge_from)
        .map(|i| weighted[i])
        .fold(0.0, f64::max);
    Ok(AgmonDecayReport {
        mode,
        eigenvalue: lambda,
        a,
        sup,
        argmax: xs[imax],
        edge,
        interior: sup.is_finite() && xs[imax].abs() < edge_from && edge < sup,
    })
}

/// Spectral heat kernel `Σ e^{-tλ} φ(x) φ(y)` per sector.
#[derive(Clone, Debug)]
pub struct SpectralKernel {
    grid: Grid,
    sectors: [SpectrumResult; 2],
    fine: Option<[SpectrumResult; 2]>,
    t_min: f64,
}

impl SpectralKernel {
    /// Kernel valid for `t ≥ t_min`; with `richardson` the values on the grid
    /// nodes are extrapolated from the grid and its refinement.
    pub fn new(pot: &Potential, coupling: f64, grid: &Grid, t_min: f64, tol: f64, richardson: bool) -> Result<Self> {
        let build = |g: &Grid| -> Result<[SpectrumResult; 2]> {
            Ok([
                spectrum_for_trace(pot, coupling, g, 0, t_min, tol, true)?,
                spectrum_for_trace(pot, coupling, g, 1, t_min, tol, true)?,
            ])
        };
        let sectors = build(grid)?;
        let fine = if richardson { Some(build(&grid.refined())?) } else { None };
        Ok(Self {
            grid: *grid,
            sectors,
            fine,
            t_min,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn spectra(&self) -> &[SpectrumResult; 2] {
        &self.sectors
    }

    fn raw(s: &SpectrumResult, t: f64, i: usize, j: usize) -> f64 {
        s.eigenvalues
            .iter()
            .zip(&s.eigenvectors)
            .map(|(l, v)| (-t * l).exp() * v[i] * v[j])
            .sum()
    }

    /// `K_degree(t, x_i, x_j)` at interior nodes of the base grid.
    pub fn value(&self, degree: usize, t: f64, i: usize, j: usize) -> Result<f64> {
        if degree > 1 {
            return Err(Error::InvalidArgument(format!("form degree must be 0 or 1, got {degree}")));
        }
        if !(t >= self.t_min) {
            return Err(Error::InvalidArgument(format!("t = {t} below the kernel's t_min = {}", self.t_min)));
        }
        let m = self.grid.interior();
        if i >= m || j >= m {
            return Err(Error::InvalidArgument("node index outside the grid".into()));
        }
        let coarse = Self::raw(&self.sectors[degree], t, i, j);
        Ok(match &self.fine {
            Some(f) => (4.0 * Self::raw(&f[degree], t, 2 * i + 1, 2 * j + 1) - coarse) / 3.0,
            None => coarse,
        })
    }

    /// Supertrace `K_0(t, x, x) - K_1(t, x, x)` at node `i`.
    pub fn diag_supertrace(&self, t: f64, i: usize) -> Result<f64> {
        Ok(self.value(0, t, i, i)? - self.value(1, t, i, i)?)
    }
}

/// Supertraced diagonal `str K(t, x, x)` from the spectral decomposition.
pub fn kernel_diag(pot: &Potential, coupling: f64, grid: &Grid, t: f64, x: f64) -> Result<f64> {
    let i = grid
        .nearest(x)
        .ok_or_else(|| Error::InvalidArgument(format!("x = {x} outside the grid")))?;
    SpectralKernel::new(pot, coupling, grid, t, 1e-10, true)?.diag_supertrace(t, i)
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpansionRow {
    pub t: f64,
    pub coupling: f64,
    pub spectral: f64,
    pub expansion: f64,
    pub difference: f64,
}

/// Spectral `str K(t, x, x)` with `T = t^{-1/2}` against the truncated
/// diagonal expansion `(4πt)^{-1/2} e^{-V(x)} Σ_κ t^κ G_κ(x)` over the
/// complete groups of an order-`order` table.
pub fn expansion_compare(f: &MultiPoly<Rational>, x: f64, order: usize, ts: &[f64], h: f64) -> Result<Vec<ExpansionRow>> {
    let tab = theta_recursion(f, order);
    let ct = tab.compile();
    let pot = tab.potential().clone();
    check_1d(&pot)?;
    let groups = diagonal_expansion(&tab, &ct, &[x]);
    let mut rows = Vec::new();
    for &t in ts {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
        }
        let coupling = t.powf(-0.5);
        let tol: f64 = 1e-10;
        let ceiling = ((1.0 / tol).ln() + 10.0) / t + 25.0;
        let grid = aligned_grid(&pot, coupling, ceiling, h, x)?;
        let i = grid.nearest(x).ok_or_else(|| Error::InvalidArgument("x outside grid".into()))?;
        let k = SpectralKernel::new(&pot, coupling, &grid, t, tol, true)?;
        let spectral = k.diag_supertrace(t, i)?;
        let series: f64 = groups
            .iter()
            .filter(|g| g.complete)
            .map(|g| t.powf(g.exponent) * g.value)
            .sum();
        let expansion = (4.0 * std::f64::consts::PI * t).powf(-0.5) * (-pot.v(&[x])).exp() * series;
        rows.push(ExpansionRow {
            t,
            coupling,
            spectral,
            expansion,
            difference: (spectral - expansion).abs(),
        });
    }
    Ok(rows)
}

/// Grid from [`Grid::auto`] with `x` on a node.
fn aligned_grid(pot: &Potential, coupling: f64, ceiling: f64, h: f64, x: f64) -> Result<Grid> {
    let g = Grid::auto(pot, coupling, ceiling, h)?;
    let steps = (x / h).round();
    if (steps * h - x).abs() > 1e-9 * (1.0 + x.abs()) {
        return Err(Error::InvalidArgument(format!("x = {x} is not a multiple of the spacing {h}")));
    }
    if x.abs() >= g.half_width {
        return Err(Error::InvalidArgument(format!("x = {x} outside the grid")));
    }
    Ok(g)
}

#[derive(Clone, Debug, Serialize)]
pub struct DuhamelPoint {
    pub x: f64,
    pub y: f64,
    pub degree: usize,
    pub spectral: f64,
    pub parametrix: f64,
    pub corrected: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DuhamelReport {
    pub t: f64,
    pub coupling: f64,
    pub order: usize,
    /// `max |K - K^k|`
    pub parametrix_error: f64,
    /// `max |K - (K^k - R̃ * K^k)|`
    pub corrected_error: f64,
    pub points: Vec<DuhamelPoint>,
}

#[derive(Clone, Copy, Debug)]
pub struct DuhamelOptions {
    pub time_nodes: usize,
    pub space_nodes: usize,
}

impl Default for DuhamelOptions {
    fn default() -> Self {
        Self {
            time_nodes: 32,
            space_nodes: 48,
        }
    }
}

/// First Duhamel correction
/// `∫₀ᵗ ds ∫ dz R̃(s, x, z) K^k(t - s, z, y)`, `R̃ = s^k R_k`.
///
/// The `z` integral uses Gauss-Hermite nodes adapted to the product of the two
/// heat Gaussians; the `s` integral is split at `t/2` and each half is mapped
/// by a square-root substitution before Gauss-Legendre.
pub fn duhamel_correction(ct: &CompiledTheta, coupling: f64, t: f64, x: f64, y: f64, opts: DuhamelOptions) -> Result<[f64; 2]> {
    if ct.n() != 1 {
        return Err(Error::InvalidArgument("Duhamel probe is one-dimensional".into()));
    }
    let k = ct.order();
    let (gl_x, gl_w) = gauss_legendre(opts.time_nodes);
    let (gh_x, gh_w) = gauss_hermite(opts.space_nodes);
    let mut acc = [0.0f64; 2];
    for half in 0..2 {
        for (v, wv) in gl_x.iter().zip(&gl_w) {
            let v = 0.5 * (v + 1.0);
            let wv = 0.5 * wv;
            let s = if half == 0 { 0.5 * t * v * v } else { t - 0.5 * t * v * v };
            let ds = t * v * wv;
            if s <= 0.0 || s >= t {
                continue;
            }
            let sigma = (s * (t - s) / t).sqrt();
            let center = x + (s / t) * (y - x);
            let mut inner = [0.0f64; 2];
            for (xi, wi) in gh_x.iter().zip(&gh_w) {
                let z = center + 2.0 * sigma * xi;
                let r = ct.remainder(s, coupling, &[x], &[z])?.scale(s.powi(k as i32));
                let kk = ct.parametrix(k, t - s, coupling, &[z], &[y])?;
                let prod = &r * &kk;
                let w = wi * (xi * xi).exp() * 2.0 * sigma;
                for (d, slot) in inner.iter_mut().enumerate() {
                    *slot += w * prod.get(d, d);
                }
            }
            for d in 0..2 {
                acc[d] += ds * inner[d];
            }
        }
    }
    if acc.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("Duhamel correction".into()));
    }
    Ok(acc)
}

/// Compares the spectral kernel with `K^k` and with `K^k - R̃ * K^k` at the
/// node pairs nearest to `pairs`.
pub fn duhamel_probe(
    f: &MultiPoly<Rational>,
    order: usize,
    coupling: f64,
    t: f64,
    pairs: &[(f64, f64)],
    h: f64,
    opts: DuhamelOptions,
) -> Result<DuhamelReport> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    let tab = theta_recursion(f, order);
    let ct = tab.compile();
    let pot = tab.potential().clone();
    check_1d(&pot)?;
    let tol: f64 = 1e-12;
    let ceiling = ((1.0 / tol).ln() + 10.0) / t + 25.0;
    let grid = Grid::auto(&pot, coupling, ceiling, h)?;
    let kern = SpectralKernel::new(&pot, coupling, &grid, t, tol, true)?;
    let rows: Vec<Result<Vec<DuhamelPoint>>> = map_range(pairs.len(), |p| {
        let (xr, yr) = pairs[p];
        let i = grid.nearest(xr).ok_or_else(|| Error::InvalidArgument(format!("x = {xr} outside the grid")))?;
        let j = grid.nearest(yr).ok_or_else(|| Error::InvalidArgument(format!("y = {yr} outside the grid")))?;
        let (x, y) = (grid.node(i), grid.node(j));
        let kk = ct.parametrix(order, t, coupling, &[x], &[y])?;
        let corr = duhamel_correction(&ct, coupling, t, x, y, opts)?;
        (0..2)
            .map(|d| {
                let par = kk.get(d, d);
                Ok(DuhamelPoint {
                    x,
                    y,
                    degree: d,
                    spectral: kern.value(d, t, i, j)?,
                    parametrix: par,
                    corrected: par - corr[d],
                })
            })
            .collect()
    });
    let mut points = Vec::new();
    for r in rows {
        points.extend(r?);
    }
    let parametrix_error = points.iter().map(|p| (p.spectral - p.parametrix).abs()).fold(0.0, f64::max);
    let corrected_error = points.iter().map(|p| (p.spectral - p.corrected).abs()).fold(0.0, f64::max);
    Ok(DuhamelReport {
        t,
        coupling,
        order,
        parametrix_error,
        corrected_error,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_real;

    fn pot(src: &str) -> Potential {
        Potential::new(&parse_real(src, 1).unwrap())
    }

    #[test]
    fn free_laplacian_matches_discrete_formula() {
        let g = Grid::new(1.0, 201).unwrap();
        let s = eigen_solve(&pot("0"), 0.0, &g, 0, 6).unwrap();
        let h = g.h();
        for (k, l) in s.eigenvalues.iter().enumerate() {
            let exact = 4.0 / (h * h) * ((k + 1) as f64 * std::f64::consts::PI / (2.0 * 200.0)).sin().powi(2);
            assert!((l - exact).abs() < 1e-10 * exact, "{k}: {l} vs {exact}");
        }
    }

    #[test]
    fn rayleigh_and_orthonormality() {
        let g = Grid::new(6.0, 601).unwrap();
        let s = eigen_solve(&pot("x^3/3"), 1.0, &g, 1, 8).unwrap();
        let op = assemble(&pot("x^3/3"), 1.0, &g, 1).unwrap();
        for (a, va) in s.eigenvalues.iter().zip(&s.eigenvectors) {
            assert!((op.rayleigh(va) - a).abs() < 1e-8 * a.abs().max(1.0));
            for vb in &s.eigenvectors {
                let dot: f64 = g.h() * va.iter().zip(vb).map(|(p, q)| p * q).sum::<f64>();
                assert!(dot.abs() < 1e-8 || (dot - 1.0).abs() < 1e-8, "{dot}");
            }
        }
    }

    #[test]
    fn oscillator_levels() {
        let g = Grid::new(10.0, 2001).unwrap();
        let p = pot("x^2/2");
        let l0 = eigenvalues_richardson(&p, 1.0, &g, 0, 10).unwrap();
        let l1 = eigenvalues_richardson(&p, 1.0, &g, 1, 10).unwrap();
        for k in 0..10 {
            assert!((l0[k] - 2.0 * k as f64).abs() < 1e-4, "{k}: {}", l0[k]);
            assert!((l1[k] - 2.0 * (k + 1) as f64).abs() < 1e-4, "{k}: {}", l1[k]);
        }
    }

    #[test]
    fn oscillator_supertrace_is_one() {
        let p = pot("x^2/2");
        let g = Grid::auto(&p, 1.0, 150.0, 0.01).unwrap();
        let s0 = spectrum_for_trace(&p, 1.0, &g, 0, 0.2, 1e-8, false).unwrap();
        let s1 = spectrum_for_trace(&p, 1.0, &g, 1, 0.2, 1e-8, false).unwrap();
        for t in [0.2, 0.5, 1.0] {
            let tr = heat_trace(&s0, &s1, t, 1e-8).unwrap();
            assert!((tr.supertrace - 1.0).abs() < 1e-3, "{tr:?}");
            // Tr e^{-t(□)} on functions: Σ e^{-2kt}
            let want = 1.0 / (1.0 - (-2.0 * t).exp());
            assert!((tr.trace0 - want).abs() < 1e-2 * want);
        }
        assert!(susy_pairing(&s0, &s1, 10, 1e-3).unwrap() < 1e-3);
    }

    #[test]
    fn tail_bound_is_enforced() {
        let p = pot("x^2/2");
        let g = Grid::new(3.0, 301).unwrap();
        assert!(matches!(
            spectrum_for_trace(&p, 1.0, &g, 0, 0.01, 1e-8, false),
            Err(Error::TailBound { .. })
        ));
        let g = Grid::new(10.0, 1001).unwrap();
        let s = eigen_solve(&p, 1.0, &g, 0, 3).unwrap();
        assert!(matches!(heat_trace(&s, &s, 0.5, 1e-8), Err(Error::TailBound { .. })));
    }

    #[test]
    fn ground_state_agmon_weighted_sup_is_interior() {
        for src in ["x^2/2", "x^4/4"] {
            let p = pot(src);
            let g = Grid::auto(&p, 1.0, 60.0, 0.01).unwrap();
            let s = eigen_solve(&p, 1.0, &g, 0, 2).unwrap();
            let r = agmon_decay_check(&p, &s, 0, 0.9).unwrap();
            assert!(r.interior, "{src}: {r:?}");
        }
    }

    #[test]
    fn weyl_exponent_for_oscillator() {
        let p = pot("x^2/2");
        let g = Grid::auto(&p, 1.0, 250.0, 0.01).unwrap();
        let s = eigen_solve(&p, 1.0, &g, 0, 80).unwrap();
        let (c, e) = weyl_fit(&s, (1, 80)).unwrap();
        assert!((e - 1.0).abs() < 0.02 && (c - 2.0).abs() < 0.1, "{c} {e}");
        assert_eq!(counting(&s, 10.5), 6);
    }

    #[test]
    fn duhamel_correction_improves() {
        let f = parse_real("x^2/2", 1).unwrap();
        let pairs = [(0.0, 0.0), (0.0, 0.3), (-0.5, 0.5), (0.7, 0.4)];
        let r = duhamel_probe(&f, 2, 1.0, 0.1, &pairs, 0.02, DuhamelOptions::default()).unwrap();
        eprintln!("{} {}", r.parametrix_error, r.corrected_error);
        assert!(r.corrected_error < 0.1 * r.parametrix_error, "{r:?}");
    }

    #[test]
    fn expansion_difference_shrinks() {
        let f = parse_real("x^2/2", 1).unwrap();
        let rows = expansion_compare(&f, 0.0, 2, &[0.4, 0.2, 0.1], 0.01).unwrap();
        eprintln!("{rows:?}");
        assert!(rows[2].difference < rows[0].difference);
    }

    #[test]
    fn invalid_inputs() {
        assert!(Grid::new(-1.0, 10).is_err());
        assert!(Grid::new(1.0, 3).is_err());
        let g = Grid::new(1.0, 11).unwrap();
        assert!(assemble(&Potential::new(&parse_real("x1*x2", 2).unwrap()), 1.0, &g, 0).is_err());
        assert!(assemble(&pot("x^2"), 1.0, &g, 2).is_err());
    }
}
