//! Brute-force ground truth: sampled convex envelopes, tangency points,
//! relaxation profiles and exhaustive grid search for tiny MINLPs.

use std::io::Write;

use thiserror::Error;

use crate::formulation::{build, Formulation, FormulationError, Model, RowSense, SeparableProblem, Strengthening};
use crate::solver::{LpStatus, Relaxation, SolveConfig};
use crate::univariate::{PiecewiseDecomposition, UnivariateFunction};

pub const DEFAULT_SAMPLES: usize = 4096;
pub const PROFILE_POINTS: usize = 101;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error("relaxation at x = {x}: {msg}")]
    Relaxation { x: f64, msg: String },
    #[error("{0} free variables after elimination (at most 3 supported)")]
    Dimension(usize),
}

/// Lower convex hull of a sampled function.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeOracle {
    pub samples: usize,
    /// Hull vertices `(x, value)`, strictly increasing in `x`.
    pub vertices: Vec<(f64, f64)>,
}

impl EnvelopeOracle {
    /// Linear interpolation between hull vertices; clamps outside the domain.
    pub fn eval(&self, x: f64) -> f64 {
        let v = &self.vertices;
        if x <= v[0].0 {
            return v[0].1;
        }
        let i = v.partition_point(|p| p.0 < x);
        if i >= v.len() {
            return v[v.len() - 1].1;
        }
        let (x0, y0) = v[i - 1];
        let (x1, y1) = v[i];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Samples the piecewise-convex relaxation of `f` on a uniform grid and
/// returns its lower convex hull (monotone chain).
pub fn envelope(
    f: &UnivariateFunction,
    d: &PiecewiseDecomposition,
    samples: usize,
) -> Result<EnvelopeOracle, OracleError> {
    if samples < 64 {
        return Err(OracleError::Invalid(format!("samples = {samples}, need at least 64")));
    }
    let (l, u) = (d.lower(), d.upper());
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for i in 0..samples {
        let x = if i + 1 == samples {
            u
        } else {
            l + (u - l) * i as f64 / (samples - 1) as f64
        };
        let y = d
            .relaxed_eval(f, x)
            .map_err(|e| OracleError::Invalid(e.to_string()))?;
        let p = (x, y);
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    Ok(EnvelopeOracle { samples, vertices: hull })
}

/// Point `t` in `[lo, hi]` where the tangent of `f` passes through
/// `(px, py)`: `f(t) + f'(t) (px - t) = py`. Bisection to `tol`; the
/// condition must change sign on the bracket.
pub fn tangency(f: &UnivariateFunction, px: f64, py: f64, lo: f64, hi: f64, tol: f64) -> Option<f64> {
    let h = |t: f64| f.value(t) + f.derivative(t) * (px - t) - py;
    let (mut a, mut b) = (lo, hi);
    let (ha, hb) = (h(a), h(b));
    if ha == 0.0 {
        return Some(a);
    }
    if hb == 0.0 {
        return Some(b);
    }
    if ha.signum() == hb.signum() {
        return None;
    }
    while b - a > tol {
        let m = 0.5 * (a + b);
        let hm = h(m);
        if hm == 0.0 {
            return Some(m);
        }
        if hm.signum() == ha.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// `n` uniformly spaced points from `l` to `u` inclusive.
pub fn grid(l: f64, u: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![l],
        _ => (0..n)
            .map(|i| if i + 1 == n { u } else { l + (u - l) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

/// Epigraph model `min t s.t. f(x) <= t` over the domain of `d`.
pub fn profile_model(
    f: &UnivariateFunction,
    d: &PiecewiseDecomposition,
    formulation: Formulation,
    strengthening: Strengthening,
) -> Result<Model, FormulationError> {
    let mut p = SeparableProblem::epigraph(f.clone(), d.lower(), d.upper());
    p.constraints[0].terms[0].decomposition = Some(d.clone());
    build(&p, formulation, strengthening)
}

/// Configuration used for profiles: cut loop run to `1e-9`.
pub fn profile_config() -> SolveConfig {
    SolveConfig {
        cut_eps: 1e-9,
        max_root_rounds: 5000,
        ..SolveConfig::default()
    }
}

fn nonlinear_var(m: &Model) -> Result<usize, OracleError> {
    match m.blocks.as_slice() {
        [b] => Ok(b.var),
        _ => Err(OracleError::Invalid(format!(
            "profile needs exactly one nonlinear variable, model has {} blocks",
            m.blocks.len()
        ))),
    }
}

/// Relaxation bound of `m` with its nonlinear variable fixed at each of `xs`.
/// One LP engine and cut pool serve the whole series.
pub fn profile_series(m: &Model, xs: &[f64], cfg: &SolveConfig) -> Result<Vec<f64>, OracleError> {
    let j = nonlinear_var(m)?;
    let (l, u) = (m.variables[j].lower, m.variables[j].upper);
    let mut rel = Relaxation::new(m, cfg);
    let sign = rel.sign();
    let mut out = Vec::with_capacity(xs.len());
    for &x in xs {
        if !(x >= l - 1e-12 && x <= u + 1e-12) {
            return Err(OracleError::Relaxation {
                x,
                msg: format!("outside [{l}, {u}]"),
            });
        }
        let x = x.clamp(l, u);
        rel.set_bounds(j, x, x);
        let r = rel.run(cfg.max_root_rounds, 0, None);
        if r.status != LpStatus::Optimal {
            return Err(OracleError::Relaxation {
                x,
                msg: format!("LP status {:?}", r.status),
            });
        }
        if !r.converged {
            return Err(OracleError::Relaxation {
                x,
                msg: "cut loop did not converge".into(),
            });
        }
        out.push(sign * r.value);
    }
    Ok(out)
}

/// Relaxation bound with the nonlinear variable fixed at `x_fixed`.
pub fn profile_point(m: &Model, x_fixed: f64, cfg: &SolveConfig) -> Result<f64, OracleError> {
    Ok(profile_series(m, &[x_fixed], cfg)?[0])
}

/// Writes `x,name1,name2,...` rows.
pub fn write_series_csv<W: Write>(mut w: W, xs: &[f64], columns: &[(&str, &[f64])]) -> std::io::Result<()> {
    write!(w, "x")?;
    for (name, _) in columns {
        write!(w, ",{name}")?;
    }
    writeln!(w)?;
    for (i, x) in xs.iter().enumerate() {
        write!(w, "{x}")?;
        for (_, col) in columns {
            write!(w, ",{}", col[i])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce {
    /// `None` when no grid point is feasible.
    pub objective: Option<f64>,
    pub point: Vec<f64>,
    /// Lipschitz-style bound on the distance to the true optimum.
    pub error_bound: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct BruteForceOptions {
    /// Points per free variable on the first pass.
    pub grid_n: usize,
    /// Zoom passes after the first; each has 10x the previous resolution.
    pub refinements: usize,
    /// Evaluate nonlinear terms through the piecewise-convex relaxation.
    pub relaxed: bool,
    pub feas_tol: f64,
}

impl Default for BruteForceOptions {
    fn default() -> Self {
        Self {
            grid_n: 1001,
            refinements: 8,
            relaxed: true,
            feas_tol: 1e-9,
        }
    }
}

enum Role {
    Fixed,
    Free,
    /// Solved from an equality row.
    Eliminated(usize),
    /// Set to the tightest value allowed by its only row.
    Epigraph(usize),
}

struct Reduced<'p> {
    p: &'p SeparableProblem,
    relaxed: bool,
    tol: f64,
    base: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    free: Vec<usize>,
    elim: Vec<(usize, usize)>,
    epi: Vec<(usize, usize)>,
}

impl Reduced<'_> {
    fn activity_without(&self, row: usize, skip: usize, x: &[f64]) -> f64 {
        let c = &self.p.constraints[row];
        let lin: f64 = c.linear.iter().filter(|&&(j, _)| j != skip).map(|&(j, a)| a * x[j]).sum();
        let nl: f64 = c
            .terms
            .iter()
            .map(|t| match (&t.decomposition, self.relaxed) {
                (Some(d), true) => d.relaxed_eval(&t.func, x[t.var]).unwrap_or(f64::INFINITY),
                _ => t.func.value(x[t.var]),
            })
            .sum();
        lin + nl
    }

    fn coef(&self, row: usize, j: usize) -> f64 {
        self.p.constraints[row]
            .linear
            .iter()
            .filter(|&&(k, _)| k == j)
            .map(|&(_, a)| a)
            .sum()
    }

    /// Objective at the completed point, or `None` if infeasible.
    fn evaluate(&self, free_vals: &[f64], x: &mut [f64]) -> Option<f64> {
        x.copy_from_slice(&self.base);
        for (k, &j) in self.free.iter().enumerate() {
            x[j] = free_vals[k];
        }
        for &(j, row) in &self.elim {
            let a = self.coef(row, j);
            let v = (self.p.constraints[row].rhs - self.activity_without(row, j, x)) / a;
            if v < self.lo[j] - self.tol || v > self.hi[j] + self.tol {
                return None;
            }
            x[j] = v.clamp(self.lo[j], self.hi[j]);
        }
        for &(j, row) in &self.epi {
            let a = self.coef(row, j);
            let v = (self.p.constraints[row].rhs - self.activity_without(row, j, x)) / a;
            let v = v.clamp(self.lo[j], self.hi[j]);
            if !v.is_finite() {
                return None;
            }
            x[j] = v;
        }
        for (i, c) in self.p.constraints.iter().enumerate() {
            let act = self.activity_without(i, usize::MAX, x);
            let tol = self.tol * (1.0 + c.rhs.abs());
            let bad = match c.sense {
                RowSense::Le => act > c.rhs + tol,
                RowSense::Ge => act < c.rhs - tol,
                RowSense::Eq => (act - c.rhs).abs() > tol,
            };
            if bad {
                return None;
            }
        }
        Some(self.p.objective_value(x))
    }
}

fn reduce<'p>(p: &'p SeparableProblem, pattern: &[(usize, f64)], opts: &BruteForceOptions) -> Option<Reduced<'p>> {
    let n = p.n_vars();
    let mut lo = p.lower.clone();
    let mut hi = p.upper.clone();
    for &(j, v) in pattern {
        lo[j] = v;
        hi[j] = v;
    }
    // interval propagation through the purely linear rows
    for _ in 0..8 {
        for c in &p.constraints {
            if !c.terms.is_empty() {
                continue;
            }
            for &(j, a) in &c.linear {
                if a == 0.0 || lo[j] >= hi[j] {
                    continue;
                }
                let (mut rest_min, mut rest_max) = (0.0, 0.0);
                for &(k, b) in c.linear.iter().filter(|&&(k, _)| k != j) {
                    let (u, v) = (b * lo[k], b * hi[k]);
                    rest_min += u.min(v);
                    rest_max += u.max(v);
                }
                // a x_j <= rhs - rest_min (Le, Eq) and a x_j >= rhs - rest_max (Ge, Eq)
                let mut cap = |limit: f64, at_most: bool| {
                    if !limit.is_finite() {
                        return;
                    }
                    let v = limit / a;
                    if at_most == (a > 0.0) {
                        hi[j] = hi[j].min(v);
                    } else {
                        lo[j] = lo[j].max(v);
                    }
                };
                if matches!(c.sense, RowSense::Le | RowSense::Eq) {
                    cap(c.rhs - rest_min, true);
                }
                if matches!(c.sense, RowSense::Ge | RowSense::Eq) {
                    cap(c.rhs - rest_max, false);
                }
                if lo[j] > hi[j] + opts.feas_tol {
                    return None;
                }
                if hi[j] < lo[j] {
                    hi[j] = lo[j];
                }
            }
        }
    }
    let nonlinear: Vec<bool> = (0..n)
        .map(|j| p.constraints.iter().any(|c| c.terms.iter().any(|t| t.var == j)))
        .collect();
    let mut role: Vec<Role> = (0..n)
        .map(|j| if lo[j] >= hi[j] { Role::Fixed } else { Role::Free })
        .collect();
    for j in 0..n {
        if !matches!(role[j], Role::Free) || nonlinear[j] || p.integer[j] {
            continue;
        }
        let rows: Vec<usize> = (0..p.constraints.len())
            .filter(|&i| p.constraints[i].linear.iter().any(|&(k, _)| k == j))
            .collect();
        if let [i] = rows[..] {
            let c = &p.constraints[i];
            let a: f64 = c.linear.iter().filter(|&&(k, _)| k == j).map(|&(_, a)| a).sum();
            let pushes = match c.sense {
                RowSense::Le => p.objective[j] * a < 0.0,
                RowSense::Ge => p.objective[j] * a > 0.0,
                RowSense::Eq => true,
            };
            if pushes && a != 0.0 {
                role[j] = Role::Epigraph(i);
            }
        }
    }
    for (i, c) in p.constraints.iter().enumerate() {
        if c.sense != RowSense::Eq || role.iter().any(|r| matches!(r, Role::Epigraph(k) if *k == i)) {
            continue;
        }
        if let Some(&(j, _)) = c
            .linear
            .iter()
            .rev()
            .find(|&&(j, a)| a != 0.0 && matches!(role[j], Role::Free))
        {
            role[j] = Role::Eliminated(i);
        }
    }
    let mut base = vec![0.0; n];
    for j in 0..n {
        base[j] = if lo[j].is_finite() { lo[j] } else { 0.0 };
    }
    let free: Vec<usize> = (0..n).filter(|&j| matches!(role[j], Role::Free)).collect();
    let mut elim = Vec::new();
    let mut epi = Vec::new();
    for (j, r) in role.iter().enumerate() {
        match *r {
            Role::Eliminated(i) => elim.push((j, i)),
            Role::Epigraph(i) => epi.push((j, i)),
            _ => {}
        }
    }
    Some(Reduced {
        p,
        relaxed: opts.relaxed,
        tol: opts.feas_tol,
        base,
        lo,
        hi,
        free,
        elim,
        epi,
    })
}

struct Best {
    obj: f64,
    free: Vec<f64>,
    point: Vec<f64>,
}

fn search_box(r: &Reduced, lo: &[f64], hi: &[f64], n: usize, best: &mut Option<Best>, evals: &mut usize) -> f64 {
    let d = r.free.len();
    let axes: Vec<Vec<f64>> = (0..d).map(|k| grid(lo[k], hi[k], n)).collect();
    let mut x = vec![0.0; r.p.n_vars()];
    let mut idx = vec![0usize; d];
    let mut vals = vec![0.0; d];
    let mut max_step = 0.0f64;
    for k in 0..d {
        if n > 1 {
            max_step = max_step.max((hi[k] - lo[k]) / (n - 1) as f64);
        }
    }
    let mut lipschitz = 0.0f64;
    let mut prev: Option<f64> = None;
    loop {
        for k in 0..d {
            vals[k] = axes[k][idx[k]];
        }
        *evals += 1;
        let obj = r.evaluate(&vals, &mut x);
        if let (Some(a), Some(b)) = (prev, obj) {
            if idx.first().copied().unwrap_or(0) > 0 && max_step > 0.0 {
                lipschitz = lipschitz.max((a - b).abs() / max_step);
            }
        }
        prev = obj;
        if let Some(o) = obj {
            if best.as_ref().is_none_or(|b| o < b.obj) {
                *best = Some(Best {
                    obj: o,
                    free: vals.clone(),
                    point: x.clone(),
                });
            }
        }
        let mut k = 0;
        loop {
            if k == d {
                return lipschitz * max_step * d.max(1) as f64;
            }
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
            prev = None;
            k += 1;
        }
    }
}

/// Exhaustive grid search over the original variables of a tiny problem.
///
/// Integer variables are enumerated over `{0, 1}`. Per pattern, bounds are
/// tightened by interval propagation through the linear rows, fixed
/// variables are removed, one variable per equality row is solved for, and
/// variables appearing in a single row and the objective are set to their
/// tightest feasible value. The remaining
/// (at most 3) variables are searched on a grid followed by zoom passes
/// around the incumbent.
pub fn brute_force_minlp(p: &SeparableProblem, opts: &BruteForceOptions) -> Result<BruteForce, OracleError> {
    let ints: Vec<usize> = (0..p.n_vars()).filter(|&j| p.integer[j]).collect();
    if ints.len() > 4 {
        return Err(OracleError::Invalid(format!("{} integer variables (at most 4)", ints.len())));
    }
    let mut best: Option<Best> = None;
    let mut err = 0.0f64;
    let mut evals = 0;
    for mask in 0..(1usize << ints.len()) {
        let pattern: Vec<(usize, f64)> = ints
            .iter()
            .enumerate()
            .map(|(b, &j)| (j, ((mask >> b) & 1) as f64))
            .filter(|&(j, v)| v >= p.lower[j] && v <= p.upper[j])
            .collect();
        if pattern.len() != ints.len() {
            continue;
        }
        let Some(r) = reduce(p, &pattern, opts) else {
            continue;
        };
        let d = r.free.len();
        if d > 3 {
            return Err(OracleError::Dimension(d));
        }
        if let Some(&j) = r.free.iter().find(|&&j| !r.lo[j].is_finite() || !r.hi[j].is_finite()) {
            return Err(OracleError::Invalid(format!("free variable {j} is unbounded")));
        }
        let flo: Vec<f64> = r.free.iter().map(|&j| r.lo[j]).collect();
        let fhi: Vec<f64> = r.free.iter().map(|&j| r.hi[j]).collect();
        let cap = (2_000_000f64).powf(1.0 / d.max(1) as f64).floor() as usize;
        let n = if d == 0 { 1 } else { opts.grid_n.clamp(2, cap.max(2)) };
        let mut local: Option<Best> = None;
        let mut bound = search_box(&r, &flo, &fhi, n, &mut local, &mut evals);
        let mut step: Vec<f64> = (0..d).map(|k| (fhi[k] - flo[k]) / (n - 1).max(1) as f64).collect();
        for _ in 0..opts.refinements {
            let Some(b) = &local else { break };
            if d == 0 {
                break;
            }
            let center = b.free.clone();
            let lo: Vec<f64> = (0..d).map(|k| (center[k] - 3.0 * step[k]).max(flo[k])).collect();
            let hi: Vec<f64> = (0..d).map(|k| (center[k] + 3.0 * step[k]).min(fhi[k])).collect();
            let m = if d == 3 { 31 } else { 61 };
            bound = search_box(&r, &lo, &hi, m, &mut local, &mut evals);
            step = (0..d).map(|k| (hi[k] - lo[k]) / (m - 1) as f64).collect();
        }
        if let Some(b) = local {
            if best.as_ref().is_none_or(|c| b.obj < c.obj) {
                err = bound;
                best = Some(b);
            }
        }
    }
    Ok(match best {
        Some(b) => BruteForce {
            objective: Some(b.obj),
            point: b.point,
            error_bound: err,
            evaluations: evals,
        },
        None => BruteForce {
            objective: None,
            point: Vec::new(),
            error_bound: 0.0,
            evaluations: evals,
        },
    })
}
