//! Discretized parabolic action, its minimization, and Agmon lengths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::potential::Potential;

/// Path `x₀..x_m` traversed in total time `t` with uniform step `t/m`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathDisc {
    pub points: Vec<Vec<f64>>,
    pub total_time: f64,
}

impl PathDisc {
    pub fn straight(x: &[f64], y: &[f64], t: f64, m: usize) -> Self {
        let points = (0..=m)
            .map(|i| {
                let s = i as f64 / m as f64;
                x.iter().zip(y).map(|(a, b)| a + s * (b - a)).collect()
            })
            .collect();
        Self { points, total_time: t }
    }

    pub fn constant(x: &[f64], t: f64, m: usize) -> Self {
        Self {
            points: vec![x.to_vec(); m + 1],
            total_time: t,
        }
    }

    pub fn segments(&self) -> usize {
        self.points.len() - 1
    }

    pub fn step(&self) -> f64 {
        self.total_time / self.segments() as f64
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// Concatenation; both halves must share the time step.
    pub fn concat(&self, other: &PathDisc) -> PathDisc {
        let mut points = self.points.clone();
        points.extend(other.points.iter().skip(1).cloned());
        PathDisc {
            points,
            total_time: self.total_time + other.total_time,
        }
    }

    /// Inserts segment midpoints.
    pub fn refine(&self) -> PathDisc {
        let mut points = Vec::with_capacity(2 * self.points.len() - 1);
        for w in self.points.windows(2) {
            points.push(w[0].clone());
            points.push(w[0].iter().zip(&w[1]).map(|(a, b)| 0.5 * (a + b)).collect());
        }
        points.push(self.points.last().unwrap().clone());
        PathDisc {
            points,
            total_time: self.total_time,
        }
    }

    pub fn reversed(&self) -> PathDisc {
        let mut points = self.points.clone();
        points.reverse();
        PathDisc {
            points,
            total_time: self.total_time,
        }
    }

    fn interior(&self) -> Vec<f64> {
        let m = self.segments();
        self.points[1..m].iter().flatten().copied().collect()
    }

    fn with_interior(&self, z: &[f64]) -> PathDisc {
        let n = self.dim();
        let mut p = self.clone();
        for (k, chunk) in z.chunks(n).enumerate() {
            p.points[k + 1].copy_from_slice(chunk);
        }
        p
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum()
}

/// Per-segment action `|Δx|²/(4Δ) + Δ T² (V_i + V_{i+1})/2`.
pub fn segment_actions(path: &PathDisc, pot: &Potential, coupling: f64) -> Vec<f64> {
    let d = path.step();
    let t2 = coupling * coupling;
    let v: Vec<f64> = path.points.iter().map(|p| pot.v(p)).collect();
    path.points
        .windows(2)
        .enumerate()
        .map(|(i, w)| dist2(&w[0], &w[1]) / (4.0 * d) + d * t2 * 0.5 * (v[i] + v[i + 1]))
        .collect()
}

pub fn action(path: &PathDisc, pot: &Potential, coupling: f64) -> f64 {
    segment_actions(path, pot, coupling).iter().sum()
}

fn action_grad(path: &PathDisc, pot: &Potential, coupling: f64) -> (f64, Vec<f64>) {
    let d = path.step();
    let t2 = coupling * coupling;
    let m = path.segments();
    let n = path.dim();
    let mut g = Vec::with_capacity((m - 1) * n);
    for i in 1..m {
        let gv = pot.grad_v(&path.points[i]);
        for k in 0..n {
            let p = &path.points;
            g.push((2.0 * p[i][k] - p[i - 1][k] - p[i + 1][k]) / (2.0 * d) + d * t2 * gv[k]);
        }
    }
    (action(path, pot, coupling), g)
}

/// Per-segment Agmon length `√((V̄ - λ)₊) |Δx|` with `V̄` the endpoint average.
pub fn segment_agmon(path: &PathDisc, pot: &Potential, lambda: f64) -> Vec<f64> {
    let v: Vec<f64> = path.points.iter().map(|p| pot.v(p)).collect();
    path.points
        .windows(2)
        .zip(v.windows(2))
        .map(|(w, vv)| (0.5 * (vv[0] + vv[1]) - lambda).max(0.0).sqrt() * dist2(&w[0], &w[1]).sqrt())
        .collect()
}

pub fn agmon_length(path: &PathDisc, pot: &Potential, lambda: f64) -> f64 {
    segment_agmon(path, pot, lambda).iter().sum()
}

/// `Σ (V̄ - λ)₊ |Δx|²`, whose minimizers are constant-speed geodesics.
fn agmon_energy_grad(path: &PathDisc, pot: &Potential, lambda: f64) -> (f64, Vec<f64>) {
    let m = path.segments();
    let n = path.dim();
    let v: Vec<f64> = path.points.iter().map(|p| pot.v(p)).collect();
    let dv: Vec<Vec<f64>> = path.points.iter().map(|p| pot.grad_v(p)).collect();
    let mut e = 0.0;
    let mut seg_g = Vec::with_capacity(m);
    let mut seg_l2 = Vec::with_capacity(m);
    for (i, w) in path.points.windows(2).enumerate() {
        let gval = 0.5 * (v[i] + v[i + 1]) - lambda;
        let l2 = dist2(&w[0], &w[1]);
        if gval > 0.0 {
            e += gval * l2;
            seg_g.push(gval);
            seg_l2.push(l2);
        } else {
            seg_g.push(0.0);
            seg_l2.push(0.0);
        }
    }
    let mut g = Vec::with_capacity((m - 1) * n);
    let p = &path.points;
    for i in 1..m {
        for k in 0..n {
            g.push(
                0.5 * dv[i][k] * (seg_l2[i - 1] + seg_l2[i]) + 2.0 * seg_g[i - 1] * (p[i][k] - p[i - 1][k])
                    - 2.0 * seg_g[i] * (p[i + 1][k] - p[i][k]),
            );
        }
    }
    (e, g)
}

#[derive(Clone, Debug, Serialize)]
pub struct DistResult {
    pub value: f64,
    pub path: PathDisc,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    pub gtol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iter: 5000,
            gtol: 1e-11,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Limited-memory BFGS with Armijo backtracking; every accepted step decreases `f`.
pub fn lbfgs<F>(fg: F, x0: Vec<f64>, opts: LbfgsOptions) -> Result<LbfgsResult>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0;
    let (mut f, mut g) = fg(&x);
    if !f.is_finite() {
        return Err(Error::NonFinite("objective at starting point".into()));
    }
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let stop = |g: &[f64], f: f64| g.iter().fold(0.0f64, |a, v| a.max(v.abs())) <= opts.gtol * (1.0 + f.abs());
    if x.is_empty() || stop(&g, f) {
        return Ok(LbfgsResult {
            x,
            f,
            iterations: 0,
            converged: true,
        });
    }
    let mut stalls = 0;
    for it in 1..=opts.max_iter {
        // two-loop recursion
        let mut q = g.clone();
        let k = s_hist.len();
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            alpha[i] = rho * dot(&s_hist[i], &q);
            for (qj, yj) in q.iter_mut().zip(&y_hist[i]) {
                *qj -= alpha[i] * yj;
            }
        }
        let gamma = if k > 0 {
            dot(&s_hist[k - 1], &y_hist[k - 1]) / dot(&y_hist[k - 1], &y_hist[k - 1])
        } else {
            1.0 / g.iter().map(|v| v.abs()).fold(1e-300, f64::max)
        };
        for v in q.iter_mut() {
            *v *= gamma;
        }
        for i in 0..k {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            let beta = rho * dot(&y_hist[i], &q);
            for (qj, sj) in q.iter_mut().zip(&s_hist[i]) {
                *qj += (alpha[i] - beta) * sj;
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&dir, &g);
        if !(slope < 0.0) {
            s_hist.clear();
            y_hist.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            let (fnew, gnew) = fg(&xn);
            if fnew.is_finite() && fnew <= f + 1e-4 * step * slope {
                accepted = Some((xn, fnew, gnew));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else {
            return Ok(LbfgsResult {
                x,
                f,
                iterations: it,
                converged: stop(&g, f),
            });
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dot(&s, &y) > 1e-300 {
            if s_hist.len() == opts.memory {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
        }
        let decrease = f - fnew;
        x = xn;
        f = fnew;
        g = gnew;
        if stop(&g, f) {
            return Ok(LbfgsResult {
                x,
                f,
                iterations: it,
                converged: true,
            });
        }
        stalls = if decrease <= 1e-16 * (1.0 + f.abs()) { stalls + 1 } else { 0 };
        if stalls >= 5 {
            return Ok(LbfgsResult {
                x,
                f,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(LbfgsResult {
        x,
        f,
        iterations: opts.max_iter,
        converged: false,
    })
}

/// Smooth seeded perturbation vanishing at the endpoints.
fn perturbed(base: &PathDisc, amp: f64, rng: &mut ChaCha8Rng) -> PathDisc {
    let m = base.segments();
    let n = base.dim();
    let coeffs: Vec<Vec<f64>> = (0..n)
        .map(|_| (1..=3).map(|_| rng.random_range(-1.0..1.0) * amp).collect())
        .collect();
    let mut p = base.clone();
    for i in 1..m {
        let s = i as f64 / m as f64;
        for k in 0..n {
            let bump: f64 = coeffs[k]
                .iter()
                .enumerate()
                .map(|(j, c)| c * ((j + 1) as f64 * std::f64::consts::PI * s).sin())
                .sum();
            p.points[i][k] += bump;
        }
    }
    p
}

#[derive(Clone, Copy, Debug)]
pub struct ActionOptions {
    pub segments: usize,
    pub restarts: usize,
    pub seed: u64,
    pub lbfgs: LbfgsOptions,
}

impl Default for ActionOptions {
    fn default() -> Self {
        Self {
            segments: 64,
            restarts: 2,
            seed: 7,
            lbfgs: LbfgsOptions::default(),
        }
    }
}

fn check_query(t: f64, x: &[f64], y: &[f64], m: usize, n: usize) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("path needs at least one segment".into()));
    }
    if x.len() != n || y.len() != n {
        return Err(Error::InvalidArgument(format!("endpoints must have {n} coordinates")));
    }
    Ok(())
}

/// Local minimization of the action from the given starts; keeps the best.
pub fn minimize_action_from(
    pot: &Potential,
    coupling: f64,
    starts: &[PathDisc],
    opts: LbfgsOptions,
) -> Result<DistResult> {
    let mut best: Option<DistResult> = None;
    let mut last_err = None;
    for start in starts {
        let run = lbfgs(
            |z| action_grad(&start.with_interior(z), pot, coupling),
            start.interior(),
            opts,
        );
        let r = match run {
            Ok(r) => r,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let path = start.with_interior(&r.x);
        let value = action(&path, pot, coupling);
        if best.as_ref().is_none_or(|b| value < b.value) {
            best = Some(DistResult {
                value,
                path,
                converged: r.converged,
                iterations: r.iterations,
            });
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(Error::NoConvergence(0)))
}

/// Upper estimate of `inf_c S_{t,x,y}(c)`.
pub fn minimize_action(
    pot: &Potential,
    coupling: f64,
    t: f64,
    x: &[f64],
    y: &[f64],
    opts: ActionOptions,
) -> Result<DistResult> {
    check_query(t, x, y, opts.segments, pot.n())?;
    let straight = PathDisc::straight(x, y, t, opts.segments);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let amp = 0.25 * (dist2(x, y).sqrt() + 1.0);
    let mut starts = vec![straight.clone()];
    starts.extend((0..opts.restarts).map(|_| perturbed(&straight, amp, &mut rng)));
    minimize_action_from(pot, coupling, &starts, opts.lbfgs)
}

/// Agmon distance for the metric `(V - λ)₊ g`, via constant-speed energy
/// minimization; never larger than the straight-segment length.
pub fn agmon_distance(
    pot: &Potential,
    lambda: f64,
    x: &[f64],
    y: &[f64],
    opts: ActionOptions,
) -> Result<DistResult> {
    check_query(1.0, x, y, opts.segments, pot.n())?;
    if lambda < 0.0 {
        return Err(Error::InvalidArgument("lambda must be nonnegative".into()));
    }
    let straight = PathDisc::straight(x, y, 1.0, opts.segments);
    let mut best = DistResult {
        value: agmon_length(&straight, pot, lambda),
        path: straight.clone(),
        converged: true,
        iterations: 0,
    };
    if pot.n() == 1 {
        // in one dimension the segment is the only simple path
        return Ok(best);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let amp = 0.25 * (dist2(x, y).sqrt() + 1.0);
    let mut starts = vec![straight.clone()];
    starts.extend((0..opts.restarts).map(|_| perturbed(&straight, amp, &mut rng)));
    for start in starts {
        let Ok(r) = lbfgs(
            |z| agmon_energy_grad(&start.with_interior(z), pot, lambda),
            start.interior(),
            opts.lbfgs,
        ) else {
            continue;
        };
        let path = start.with_interior(&r.x);
        let value = agmon_length(&path, pot, lambda);
        if value < best.value {
            best = DistResult {
                value,
                path,
                converged: r.converged,
                iterations: r.iterations,
            };
        }
    }
    Ok(best)
}

/// `(t, x, y)` query for the bound suite.
#[derive(Clone, Debug, Serialize)]
pub struct Query {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SampleVerdict {
    pub query: Query,
    pub value: f64,
    pub reverse_value: f64,
    pub symmetry_gap: f64,
    pub symmetry_ok: bool,
    pub straight_action: f64,
    pub below_straight: bool,
    /// Every segment of every evaluated path satisfies action ≥ Agmon length.
    pub agmon_ok: bool,
    pub worst_agmon_margin: f64,
    pub triangle_ok: bool,
    pub triangle_split: f64,
    pub triangle_concat: f64,
    pub triangle_seeded: f64,
    /// `value / min{β T V^{(1-κ)/2}(x), t T² V(x)/2}` with `β = 1`.
    pub effbound_ratio: f64,
    pub effbound_branch: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub coupling: f64,
    pub samples: Vec<SampleVerdict>,
    pub symmetry_tol: f64,
    pub beta_estimate: f64,
}

impl BoundReport {
    pub fn all_ok(&self) -> bool {
        self.samples
            .iter()
            .all(|s| s.symmetry_ok && s.below_straight && s.agmon_ok && s.triangle_ok)
    }
}

fn agmon_margin(path: &PathDisc, pot: &Potential, coupling: f64) -> f64 {
    segment_actions(path, pot, coupling)
        .iter()
        .zip(segment_agmon(path, pot, 0.0))
        .map(|(a, l)| a - coupling * l)
        .fold(f64::INFINITY, f64::min)
}

/// Property checks for the parabolic distance on a set of `(t, x, y)` queries.
pub fn bound_suite(
    pot: &Potential,
    coupling: f64,
    queries: &[Query],
    kappa: f64,
    symmetry_tol: f64,
    opts: ActionOptions,
) -> Result<BoundReport> {
    let m = opts.segments;
    let run = |q: &Query, idx: usize| -> Result<SampleVerdict> {
        let o = ActionOptions {
            seed: opts.seed.wrapping_add(idx as u64),
            ..opts
        };
        let fwd = minimize_action(pot, coupling, q.t, &q.x, &q.y, o)?;
        let bwd = minimize_action(pot, coupling, q.t, &q.y, &q.x, o)?;
        let straight = PathDisc::straight(&q.x, &q.y, q.t, m);
        let straight_action = action(&straight, pot, coupling);

        // triangle: split at a grid time, z drawn from the seed
        let mut rng = ChaCha8Rng::seed_from_u64(o.seed ^ 0x7a11);
        let m2 = rng.random_range(1..m);
        let s = q.t * m2 as f64 / m as f64;
        let z: Vec<f64> = q.y.iter().map(|v| v + rng.random_range(-1.0..1.0)).collect();
        let first = minimize_action(pot, coupling, q.t - s, &q.x, &q.y, ActionOptions { segments: m - m2, ..o })?;
        let second = minimize_action(pot, coupling, s, &q.y, &z, ActionOptions { segments: m2, ..o })?;
        let concat = first.path.concat(&second.path);
        let concat_action = action(&concat, pot, coupling);
        let seeded = minimize_action_from(pot, coupling, &[concat.clone(), PathDisc::straight(&q.x, &z, q.t, m)], o.lbfgs)?;

        let margins = [&fwd.path, &bwd.path, &straight, &first.path, &second.path, &concat, &seeded.path]
            .iter()
            .map(|p| agmon_margin(p, pot, coupling))
            .fold(f64::INFINITY, f64::min);

        let v = pot.v(&q.x);
        let a = coupling * v.powf((1.0 - kappa) / 2.0);
        let b = q.t * coupling * coupling * v / 2.0;
        let (denom, branch) = if a < b { (a, "agmon") } else { (b, "parabolic") };
        let gap = (fwd.value - bwd.value).abs();
        Ok(SampleVerdict {
            query: q.clone(),
            value: fwd.value,
            reverse_value: bwd.value,
            symmetry_gap: gap,
            symmetry_ok: gap <= symmetry_tol,
            straight_action,
            below_straight: fwd.value <= straight_action,
            agmon_ok: margins >= 0.0,
            worst_agmon_margin: margins,
            triangle_ok: seeded.value <= concat_action,
            triangle_split: s,
            triangle_concat: concat_action,
            triangle_seeded: seeded.value,
            effbound_ratio: if denom > 0.0 { fwd.value / denom } else { f64::INFINITY },
            effbound_branch: branch,
        })
    };
    let samples: Vec<Result<SampleVerdict>> =
        crate::par::map_range(queries.len(), |i| run(&queries[i], i));
    let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;
    let beta_estimate = samples
        .iter()
        .filter(|s| s.effbound_branch == "agmon")
        .map(|s| s.effbound_ratio)
        .fold(f64::INFINITY, f64::min);
    Ok(BoundReport {
        coupling,
        samples,
        symmetry_tol,
        beta_estimate,
    })
}

/// `d²(x,y)/(t-s) + d²(y,z)/s ≥ d²(x,z)/t`, the pure kinetic triangle inequality.
pub fn kinetic_triangle(t: f64, s: f64, x: &[f64], y: &[f64], z: &[f64]) -> bool {
    dist2(x, y) / (t - s) + dist2(y, z) / s >= dist2(x, z) / t
}

/// Uniform random queries in a box.
pub fn random_queries(n: usize, count: usize, t_range: (f64, f64), half_width: f64, seed: u64) -> Vec<Query> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| Query {
            t: rng.random_range(t_range.0..t_range.1),
            x: (0..n).map(|_| rng.random_range(-half_width..half_width)).collect(),
            y: (0..n).map(|_| rng.random_range(-half_width..half_width)).collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_real;

    fn pot(src: &str, n: usize) -> Potential {
        Potential::new(&parse_real(src, n).unwrap())
    }

    #[test]
    fn action_examples() {
        let p = pot("x1^2/2", 1);
        let straight = PathDisc::straight(&[0.0], &[1.0], 1.0, 16);
        assert!((action(&straight, &p, 0.0) - 0.25).abs() < 1e-15);
        let c = PathDisc::constant(&[0.7], 2.0, 8);
        assert!((action(&c, &p, 1.5) - 2.0 * 2.25 * 0.49).abs() < 1e-14);
        assert_eq!(action(&PathDisc::constant(&[0.0], 1.0, 8), &p, 1.0), 0.0);
    }

    #[test]
    fn kinetic_minimum_is_straight() {
        let p = pot("x1^3/3", 1);
        let r = minimize_action(&p, 0.0, 0.7, &[-0.3], &[1.1], ActionOptions::default()).unwrap();
        assert!((r.value - 1.4f64.powi(2) / 2.8).abs() < 1e-10);
        let z = minimize_action(&pot("x1^2/2", 1), 1.0, 0.9, &[0.0], &[0.0], ActionOptions::default()).unwrap();
        assert!(z.value.abs() < 1e-14);
    }

    #[test]
    fn oscillator_strictly_below_straight() {
        let p = pot("x1^2/2", 1);
        let o = ActionOptions::default();
        let r = minimize_action(&p, 1.0, 1.0, &[0.0], &[1.0], o).unwrap();
        let s = action(&PathDisc::straight(&[0.0], &[1.0], 1.0, o.segments), &p, 1.0);
        assert!((s - (0.25 + 1.0 / 3.0)).abs() < 1e-3);
        assert!(r.value < s - 1e-3, "{} vs {}", r.value, s);
        // minimizer sinh(2s)/sinh(2), action coth(2)/2
        let exact = 0.5 / (2.0f64).tanh();
        assert!((r.value - exact).abs() < 1e-3, "{} vs {}", r.value, exact);
    }

    #[test]
    fn agmon_examples() {
        let p = pot("x1^2/2", 1);
        let s = PathDisc::straight(&[0.0], &[1.0], 1.0, 64);
        assert!((agmon_length(&s, &p, 0.0) - 0.5).abs() < 1e-3);
        assert_eq!(agmon_length(&s, &p, 1.0), 0.0);
        let d = agmon_distance(&p, 0.0, &[0.0], &[1.7], ActionOptions::default()).unwrap();
        assert!((d.value - 1.7f64.powi(2) / 2.0).abs() < 1e-3);
    }

    #[test]
    fn agmon_distance_in_plane_is_not_above_straight() {
        let p = pot("x1^2/2 + x2^4/4", 2);
        let o = ActionOptions::default();
        let (x, y) = ([1.5, -1.0], [-1.0, 1.2]);
        let d = agmon_distance(&p, 0.0, &x, &y, o).unwrap();
        let s = agmon_length(&PathDisc::straight(&x, &y, 1.0, o.segments), &p, 0.0);
        assert!(d.value <= s);
        assert!(d.value < s - 1e-3, "curved path through the well should be shorter");
    }

    #[test]
    fn refinement_does_not_increase() {
        let p = pot("x1^2/2", 1);
        let o = ActionOptions::default();
        let coarse = minimize_action(&p, 1.0, 0.5, &[0.2], &[-0.8], o).unwrap();
        let fine = minimize_action_from(&p, 1.0, &[coarse.path.refine()], o.lbfgs).unwrap();
        assert!(fine.value <= coarse.value + 1e-6);
    }

    #[test]
    fn small_suite() {
        let p = pot("x1^2/2", 1);
        let qs = random_queries(1, 4, (0.1, 1.0), 1.5, 3);
        let rep = bound_suite(&p, 1.0, &qs, 0.0, 1e-4, ActionOptions::default()).unwrap();
        assert!(rep.all_ok(), "{rep:#?}");
        assert!(kinetic_triangle(1.0, 0.3, &[0.0], &[0.5], &[2.0]));
    }
}
