//! Benchmark families: the nonlinear continuous knapsack (NCK) and the
//! nonlinear uncapacitated facility location problem (UFL).
//!
//! # Random generation
//!
//! Instances are drawn with SplitMix64 seeded directly with the instance
//! seed. One draw advances the state by `0x9E3779B97F4A7C15` and mixes it:
//!
//! ```text
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! z ^ (z >> 31)
//! ```
//!
//! A uniform value on `[lo, hi]` is `lo + (hi - lo) * (draw >> 11) * 2^-53`.
//! NCK draws, for each item in order, the weight and then (logistic family
//! only) `a`, `b`, `c`, `d`. UFL draws the fixed costs `C_1, ..., C_K`.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulation::{Constraint, FormulationError, NonlinearTerm, RowSense, SeparableProblem};
use crate::univariate::{decompose, DecomposeError, PiecewiseDecomposition, UnivariateFunction};

pub const NCK_UPPER: f64 = 100.0;
/// Flow above which a facility is opened by the repair heuristic.
pub const UFL_OPEN_TOL: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform on `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NckFamily {
    Logistic,
    Trig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NckInstance {
    pub n: usize,
    pub family: NckFamily,
    pub weights: Vec<f64>,
    /// Empty for the trig family.
    pub logistic: Vec<LogisticParams>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UflInstance {
    pub k: usize,
    pub t: usize,
    pub ufl_type: u8,
    pub fixed_costs: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "problem", rename_all = "snake_case")]
pub enum Instance {
    Nck(NckInstance),
    Ufl(UflInstance),
}

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
    #[error("irreparable point: {0}")]
    Irreparable(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("instance file: {0}")]
    Json(#[from] serde_json::Error),
}

/// `7.5 sin(pi (x - 10) / 40) - 15 cos(pi (x - 10) / 80) + 19.5`.
pub fn trig_function() -> UnivariateFunction {
    use std::f64::consts::PI;
    UnivariateFunction::sine(7.5, PI / 40.0, -PI / 4.0)
        .plus(&UnivariateFunction::cosine(-15.0, PI / 80.0, -PI / 8.0))
        .plus(&UnivariateFunction::polynomial(vec![19.5]))
}

impl NckInstance {
    pub fn capacity(&self) -> f64 {
        50.0 * self.weights.iter().sum::<f64>()
    }

    pub fn function(&self, j: usize) -> UnivariateFunction {
        match self.family {
            NckFamily::Trig => trig_function(),
            NckFamily::Logistic => {
                let p = self.logistic[j];
                UnivariateFunction::logistic(p.a, p.b, p.c, p.d)
            }
        }
    }
}

/// Shipping-cost parameters `(a, b, c)` of the three UFL types.
pub fn ufl_type_params(ufl_type: u8) -> Option<(f64, f64, f64)> {
    match ufl_type {
        1 => Some((15.0, 2.0, 1.0)),
        2 => Some((25.0, 5.0, 5.0)),
        3 => Some((25.0, 10.0, 5.0)),
        _ => None,
    }
}

impl UflInstance {
    pub fn function(&self) -> UnivariateFunction {
        UnivariateFunction::squared_composite(self.a, self.b, self.c)
    }

    pub fn w_index(&self, k: usize, t: usize) -> usize {
        self.k + k * self.t + t
    }

    pub fn s_index(&self, k: usize, t: usize) -> usize {
        self.k + self.k * self.t + k * self.t + t
    }
}

pub fn gen_nck(n: usize, family: NckFamily, seed: u64) -> Result<NckInstance, ProblemError> {
    if n == 0 {
        return Err(ProblemError::Invalid("n must be at least 1".into()));
    }
    let mut rng = SplitMix64::new(seed);
    let mut weights = Vec::with_capacity(n);
    let mut logistic = Vec::new();
    for _ in 0..n {
        weights.push(rng.uniform(1.0, 100.0));
        if family == NckFamily::Logistic {
            logistic.push(LogisticParams {
                a: rng.uniform(0.1, 0.2),
                b: rng.uniform(0.0, 100.0),
                c: rng.uniform(0.0, 100.0),
                d: rng.uniform(-100.0, 0.0),
            });
        }
    }
    Ok(NckInstance {
        n,
        family,
        weights,
        logistic,
        seed,
    })
}

pub fn gen_ufl(k: usize, t: usize, ufl_type: u8, seed: u64) -> Result<UflInstance, ProblemError> {
    if k == 0 || t == 0 {
        return Err(ProblemError::Invalid("k and t must be at least 1".into()));
    }
    let (a, b, c) = ufl_type_params(ufl_type).ok_or_else(|| ProblemError::Invalid(format!("UFL type {ufl_type}")))?;
    let mut rng = SplitMix64::new(seed);
    let fixed_costs = (0..k).map(|_| rng.uniform(1.0, 100.0)).collect();
    Ok(UflInstance {
        k,
        t,
        ufl_type,
        fixed_costs,
        a,
        b,
        c,
        seed,
    })
}

fn nck_separable(inst: &NckInstance) -> Result<SeparableProblem, ProblemError> {
    let n = inst.n;
    let mut names: Vec<String> = (0..n).map(|j| format!("x_{j}")).collect();
    names.extend((0..n).map(|j| format!("p_{j}")));
    let mut lower = vec![0.0; n];
    lower.extend(vec![f64::NEG_INFINITY; n]);
    let mut upper = vec![NCK_UPPER; n];
    upper.extend(vec![f64::INFINITY; n]);
    let mut p = SeparableProblem::with_vars(names, lower, upper);
    for j in 0..n {
        p.objective[n + j] = -1.0;
    }
    p.constraints.push(Constraint {
        name: "knapsack".into(),
        linear: (0..n).map(|j| (j, inst.weights[j])).collect(),
        terms: Vec::new(),
        sense: RowSense::Le,
        rhs: inst.capacity(),
    });
    let shared = match inst.family {
        NckFamily::Trig => Some(decompose(&trig_function().negated(), 0.0, NCK_UPPER)?),
        NckFamily::Logistic => None,
    };
    for j in 0..n {
        let func = inst.function(j).negated();
        let d = match &shared {
            Some(d) => d.clone(),
            None => decompose(&func, 0.0, NCK_UPPER)?,
        };
        p.constraints.push(Constraint {
            name: format!("profit_{j}"),
            linear: vec![(n + j, 1.0)],
            terms: vec![NonlinearTerm {
                var: j,
                func,
                decomposition: Some(d),
            }],
            sense: RowSense::Le,
            rhs: 0.0,
        });
    }
    Ok(p)
}

fn ufl_separable(inst: &UflInstance) -> Result<SeparableProblem, ProblemError> {
    let (nk, nt) = (inst.k, inst.t);
    let g = inst.function();
    let d = decompose(&g, 0.0, 1.0)?;
    let mut names: Vec<String> = (0..nk).map(|k| format!("y_{k}")).collect();
    let mut lower = vec![0.0; nk];
    let mut upper = vec![1.0; nk];
    for k in 0..nk {
        for t in 0..nt {
            names.push(format!("w_{k}_{t}"));
            lower.push(0.0);
            upper.push(1.0);
        }
    }
    for k in 0..nk {
        for t in 0..nt {
            names.push(format!("s_{k}_{t}"));
            lower.push(0.0);
            upper.push(f64::INFINITY);
        }
    }
    let mut p = SeparableProblem::with_vars(names, lower, upper);
    for k in 0..nk {
        p.integer[k] = true;
        p.objective[k] = inst.fixed_costs[k];
        for t in 0..nt {
            p.objective[inst.s_index(k, t)] = 1.0;
        }
    }
    for k in 0..nk {
        for t in 0..nt {
            p.constraints.push(Constraint {
                name: format!("ship_{k}_{t}"),
                linear: vec![(inst.s_index(k, t), -1.0)],
                terms: vec![NonlinearTerm {
                    var: inst.w_index(k, t),
                    func: g.clone(),
                    decomposition: Some(d.clone()),
                }],
                sense: RowSense::Le,
                rhs: 0.0,
            });
        }
    }
    for t in 0..nt {
        p.constraints.push(Constraint {
            name: format!("demand_{t}"),
            linear: (0..nk).map(|k| (inst.w_index(k, t), 1.0)).collect(),
            terms: Vec::new(),
            sense: RowSense::Eq,
            rhs: 1.0,
        });
    }
    for k in 0..nk {
        for t in 0..nt {
            p.constraints.push(Constraint {
                name: format!("open_{k}_{t}"),
                linear: vec![(inst.w_index(k, t), 1.0), (k, -1.0)],
                terms: Vec::new(),
                sense: RowSense::Le,
                rhs: 0.0,
            });
        }
    }
    Ok(p)
}

impl Instance {
    /// Decomposed separable problem (minimization; NCK profit is negated).
    pub fn to_separable(&self) -> Result<SeparableProblem, ProblemError> {
        match self {
            Instance::Nck(i) => nck_separable(i),
            Instance::Ufl(i) => ufl_separable(i),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Instance::Nck(i) => i.seed,
            Instance::Ufl(i) => i.seed,
        }
    }

    /// Exact objective of the original problem at `x` (minimization form).
    pub fn evaluate_original(&self, x: &[f64]) -> f64 {
        match self {
            Instance::Nck(i) => -x[i.n..2 * i.n].iter().sum::<f64>(),
            Instance::Ufl(i) => {
                let open: f64 = (0..i.k).map(|k| i.fixed_costs[k] * x[k]).sum();
                let ship: f64 = (0..i.k)
                    .flat_map(|k| (0..i.t).map(move |t| (k, t)))
                    .map(|(k, t)| x[i.s_index(k, t)])
                    .sum();
                open + ship
            }
        }
    }

    /// Repairs the problem variables of an LP point into a feasible point of
    /// the original nonconvex problem.
    pub fn evaluate_and_repair(&self, a: &[f64]) -> Result<(Vec<f64>, f64), ProblemError> {
        match self {
            Instance::Nck(i) => self.repair_with(a, &|j, x| i.function(j).value(x)),
            Instance::Ufl(i) => {
                let g = i.function();
                self.repair_with(a, &|_, w| g.value(w))
            }
        }
    }

    /// Repair evaluated with the piecewise-convex relaxation of `p` (the
    /// separable form of this instance): NCK profits are `-ĥ_j(x_j)` where
    /// `ĥ_j` relaxes `-g_j`, UFL shipping costs are `ĝ(w)`.
    pub fn relaxed_repair(&self, p: &SeparableProblem, a: &[f64]) -> Result<(Vec<f64>, f64), ProblemError> {
        let eval = |row: usize, x: f64| -> f64 {
            let t = &p.constraints[row].terms[0];
            match &t.decomposition {
                Some(d) => d.relaxed_eval(&t.func, x).unwrap_or_else(|_| t.func.value(x)),
                None => t.func.value(x),
            }
        };
        match self {
            Instance::Nck(_) => self.repair_with(a, &|j, x| -eval(1 + j, x)),
            Instance::Ufl(_) => self.repair_with(a, &|_, w| eval(0, w)),
        }
    }

    /// `value(j, x)` is the NCK profit of item `j`, or the UFL shipping cost.
    fn repair_with(&self, a: &[f64], value: &dyn Fn(usize, f64) -> f64) -> Result<(Vec<f64>, f64), ProblemError> {
        match self {
            Instance::Nck(i) => {
                let n = i.n;
                let mut x: Vec<f64> = a[..n].iter().map(|v| v.clamp(0.0, NCK_UPPER)).collect();
                let load: f64 = (0..n).map(|j| i.weights[j] * x[j]).sum();
                let cap = i.capacity();
                if load > cap {
                    let f = cap / load * (1.0 - 1e-12);
                    x.iter_mut().for_each(|v| *v *= f);
                }
                let mut point = x.clone();
                point.extend((0..n).map(|j| value(j, x[j])));
                let obj = self.evaluate_original(&point);
                Ok((point, obj))
            }
            Instance::Ufl(i) => {
                let (nk, nt) = (i.k, i.t);
                let g = |w: f64| value(0, w);
                let mut point = vec![0.0; nk + 2 * nk * nt];
                let mut open = Vec::new();
                for k in 0..nk {
                    let flow = (0..nt).map(|t| a[i.w_index(k, t)]).fold(0.0f64, f64::max);
                    if flow > UFL_OPEN_TOL {
                        point[k] = 1.0;
                        open.push(k);
                    }
                }
                if open.is_empty() {
                    return Err(ProblemError::Irreparable("no facility carries flow".into()));
                }
                let (split_cost, split) = best_split(&g, open.len());
                for t in 0..nt {
                    let total: f64 = open.iter().map(|&k| a[i.w_index(k, t)].max(0.0)).sum();
                    let lp_flows: Option<Vec<f64>> =
                        (total > 0.0).then(|| open.iter().map(|&k| a[i.w_index(k, t)].max(0.0) / total).collect());
                    let lp_cost = lp_flows.as_ref().map_or(f64::INFINITY, |f| f.iter().map(|&w| g(w)).sum());
                    let flows = match lp_flows {
                        Some(f) if lp_cost <= split_cost => f,
                        _ => {
                            // largest LP flows take the largest shares
                            let mut order: Vec<usize> = (0..open.len()).collect();
                            order.sort_by(|&p, &q| {
                                a[i.w_index(open[q], t)].total_cmp(&a[i.w_index(open[p], t)]).then(p.cmp(&q))
                            });
                            let mut f = vec![0.0; open.len()];
                            for (r, &o) in order.iter().enumerate() {
                                f[o] = split[r];
                            }
                            f
                        }
                    };
                    for (o, &k) in open.iter().enumerate() {
                        point[i.w_index(k, t)] = flows[o];
                        point[i.s_index(k, t)] = g(flows[o]);
                    }
                }
                let obj = self.evaluate_original(&point);
                Ok((point, obj))
            }
        }
    }

    /// Constructive UFL solution: opens the `M` cheapest facilities and ships
    /// every demand with the best split over them, for the best `M`. `value`
    /// is the shipping cost function. `None` for NCK.
    pub fn construct(&self, value: &dyn Fn(f64) -> f64) -> Option<(Vec<f64>, f64)> {
        let Instance::Ufl(i) = self else { return None };
        let mut order: Vec<usize> = (0..i.k).collect();
        order.sort_by(|&p, &q| i.fixed_costs[p].total_cmp(&i.fixed_costs[q]).then(p.cmp(&q)));
        let mut best: Option<(Vec<f64>, f64)> = None;
        let mut fixed = 0.0;
        for m in 1..=i.k {
            fixed += i.fixed_costs[order[m - 1]];
            let (cost, split) = best_split(value, m);
            let total = fixed + i.t as f64 * cost;
            if best.as_ref().is_some_and(|b| b.1 <= total) {
                continue;
            }
            let mut point = vec![0.0; i.k + 2 * i.k * i.t];
            for (r, &k) in order[..m].iter().enumerate() {
                point[k] = 1.0;
                for t in 0..i.t {
                    point[i.w_index(k, t)] = split[r];
                    point[i.s_index(k, t)] = value(split[r]);
                }
            }
            for &k in &order[m..] {
                for t in 0..i.t {
                    point[i.s_index(k, t)] = value(0.0);
                }
            }
            let obj = self.evaluate_original(&point);
            best = Some((point, obj));
        }
        best
    }

    /// Largest violation of the original problem's constraints at `x`.
    pub fn original_violation(&self, p: &SeparableProblem, x: &[f64]) -> f64 {
        let mut v = p.max_violation(x, false);
        if let Instance::Ufl(i) = self {
            for k in 0..i.k {
                v = v.max((x[k] - x[k].round()).abs());
            }
        }
        v
    }

    pub fn save(&self, path: &Path) -> Result<(), ProblemError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ProblemError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Primal heuristic for branch-and-cut: repairs the problem variables of a
/// node solution.
/// Primal heuristic for branch-and-cut over the relaxation `p` of `inst`:
/// repairs the problem variables of a node solution.
pub fn primal_hook<'a>(
    inst: &'a Instance,
    p: &'a SeparableProblem,
) -> impl Fn(&crate::formulation::Model, &[f64]) -> Option<(Vec<f64>, f64)> + 'a {
    move |m, values| inst.relaxed_repair(p, &values[..m.n_original]).ok()
}

/// Cheapest way to split one unit of demand over at most `m` facilities
/// sharing the cost function `g`; returns the cost and `m` shares in
/// non-increasing order.
///
/// Candidates put `a` shares at `u` and `m' - a` shares at
/// `(1 - a u) / (m' - a)` for every `m' <= m`; `u` is scanned on a grid and
/// polished by golden-section search.
pub fn best_split(g: &dyn Fn(f64) -> f64, m: usize) -> (f64, Vec<f64>) {
    let g0 = g(0.0);
    let mut best = (g(1.0) + (m as f64 - 1.0) * g0, 1.0, 1usize, 1usize);
    for mm in 1..=m {
        let rest = (m - mm) as f64 * g0;
        for a in 1..=mm {
            let b = mm - a;
            let cost = |u: f64| -> f64 {
                if b == 0 {
                    return a as f64 * g(u) + rest;
                }
                let v = (1.0 - a as f64 * u) / b as f64;
                a as f64 * g(u) + b as f64 * g(v.max(0.0)) + rest
            };
            let (lo, hi) = if b == 0 {
                let u = 1.0 / a as f64;
                (u, u)
            } else {
                (0.0, 1.0 / a as f64)
            };
            let n = 400;
            let mut bu = lo;
            let mut bc = cost(lo);
            for s in 1..=n {
                let u = lo + (hi - lo) * s as f64 / n as f64;
                let c = cost(u);
                if c < bc {
                    bc = c;
                    bu = u;
                }
            }
            let h = (hi - lo) / n as f64;
            let (mut x0, mut x1) = ((bu - h).max(lo), (bu + h).min(hi));
            let r = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..60 {
                if x1 - x0 < 1e-13 {
                    break;
                }
                let c = x1 - r * (x1 - x0);
                let d = x0 + r * (x1 - x0);
                if cost(c) <= cost(d) {
                    x1 = d;
                } else {
                    x0 = c;
                }
            }
            let u = 0.5 * (x0 + x1);
            for cand in [u, bu] {
                let c = cost(cand);
                if c < best.0 {
                    best = (c, cand, a, mm);
                }
            }
        }
    }
    let (cost, u, a, mm) = best;
    let mut shares = vec![0.0; m];
    let b = mm - a;
    let v = if b == 0 { 0.0 } else { ((1.0 - a as f64 * u) / b as f64).max(0.0) };
    for (r, s) in shares.iter_mut().enumerate().take(mm) {
        *s = if r < a { u } else { v };
    }
    shares.sort_by(|p, q| q.total_cmp(p));
    (cost, shares)
}

/// Splits the concave segment containing `x_star` at `x_star`.
pub fn refine_intervals(
    d: &PiecewiseDecomposition,
    f: &UnivariateFunction,
    x_star: f64,
) -> Result<PiecewiseDecomposition, DecomposeError> {
    d.refine_at(f, x_star)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "nck-logistic")]
    NckLogistic,
    #[serde(rename = "nck-trig")]
    NckTrig,
    #[serde(rename = "ufl-1")]
    Ufl1,
    #[serde(rename = "ufl-2")]
    Ufl2,
    #[serde(rename = "ufl-3")]
    Ufl3,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::NckLogistic, Family::NckTrig, Family::Ufl1, Family::Ufl2, Family::Ufl3];

    pub fn label(self) -> &'static str {
        match self {
            Family::NckLogistic => "nck-logistic",
            Family::NckTrig => "nck-trig",
            Family::Ufl1 => "ufl-1",
            Family::Ufl2 => "ufl-2",
            Family::Ufl3 => "ufl-3",
        }
    }

    pub fn is_nck(self) -> bool {
        matches!(self, Family::NckLogistic | Family::NckTrig)
    }

    /// Intervals per function (the NCK "Int." column; 0 for UFL).
    pub fn intervals(self) -> usize {
        match self {
            Family::NckLogistic => 2,
            Family::NckTrig => 4,
            _ => 0,
        }
    }

    /// Instance of the family. NCK uses `size.0` items; UFL uses
    /// `size = (K, T)`.
    pub fn generate(self, size: (usize, usize), seed: u64) -> Result<Instance, ProblemError> {
        Ok(match self {
            Family::NckLogistic => Instance::Nck(gen_nck(size.0, NckFamily::Logistic, seed)?),
            Family::NckTrig => Instance::Nck(gen_nck(size.0, NckFamily::Trig, seed)?),
            Family::Ufl1 => Instance::Ufl(gen_ufl(size.0, size.1, 1, seed)?),
            Family::Ufl2 => Instance::Ufl(gen_ufl(size.0, size.1, 2, seed)?),
            Family::Ufl3 => Instance::Ufl(gen_ufl(size.0, size.1, 3, seed)?),
        })
    }
}

impl FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Family::ALL
            .into_iter()
            .find(|f| f.label() == s)
            .ok_or_else(|| format!("unknown family '{s}' (expected one of nck-logistic, nck-trig, ufl-1, ufl-2, ufl-3)"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // first outputs for seed 0 of the reference SplitMix64
        let mut r = SplitMix64::new(0);
        assert_eq!(r.next_u64(), 0xE220A8397B1DCDAF);
        assert_eq!(r.next_u64(), 0x6E789E6AA1B965F4);
        assert_eq!(r.next_u64(), 0x06C45D188009454F);
    }

    #[test]
    fn trig_formula() {
        let g = trig_function();
        for &x in &[0.0, 10.0, 37.5, 100.0] {
            let pi = std::f64::consts::PI;
            let want = 7.5 * (pi * (x - 10.0) / 40.0).sin() - 15.0 * (pi * (x - 10.0) / 80.0).cos() + 19.5;
            assert!((g.value(x) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn trig_has_four_segments() {
        let d = decompose(&trig_function().negated(), 0.0, 100.0).unwrap();
        assert_eq!(d.segment_count(), 4);
    }

    #[test]
    fn generation_is_deterministic_and_in_range() {
        let a = gen_nck(50, NckFamily::Logistic, 7).unwrap();
        assert_eq!(a, gen_nck(50, NckFamily::Logistic, 7).unwrap());
        assert_ne!(a, gen_nck(50, NckFamily::Logistic, 8).unwrap());
        assert!((a.capacity() - 50.0 * a.weights.iter().sum::<f64>()).abs() < 1e-9);
        let u = gen_ufl(6, 12, 3, 1).unwrap();
        assert_eq!((u.a, u.b, u.c), (25.0, 10.0, 5.0));
        assert!(gen_ufl(1, 1, 4, 0).is_err());
        assert!(gen_nck(0, NckFamily::Trig, 0).is_err());
    }

    #[test]
    fn counting() {
        let p = Instance::Nck(gen_nck(1, NckFamily::Trig, 0).unwrap()).to_separable().unwrap();
        assert_eq!(p.constraints.len(), 2);
        assert_eq!(p.n_vars(), 2);
        let u = Instance::Ufl(gen_ufl(6, 12, 1, 0).unwrap());
        let p = u.to_separable().unwrap();
        let nonlinear = p.constraints.iter().filter(|c| !c.terms.is_empty()).count();
        let eq = p.constraints.iter().filter(|c| c.sense == RowSense::Eq).count();
        assert_eq!(nonlinear, 72);
        assert_eq!(eq, 12);
        assert_eq!(p.constraints.len() - nonlinear - eq, 72);
        assert_eq!(p.integer.iter().filter(|&&b| b).count(), 6);
    }

    #[test]
    fn ufl_segment_counts() {
        let convex = |ty| {
            let u = gen_ufl(1, 1, ty, 0).unwrap();
            let d = decompose(&u.function(), 0.0, 1.0).unwrap();
            d.convex_segments().count()
        };
        assert_eq!(convex(1), 1);
        assert_eq!(convex(2), 2);
        assert_eq!(convex(3), 3);
    }

    #[test]
    fn repair_examples() {
        let inst = Instance::Nck(gen_nck(3, NckFamily::Trig, 1).unwrap());
        let (pt, obj) = inst.evaluate_and_repair(&[0.0; 6]).unwrap();
        assert!((obj + 3.0 * trig_function().value(0.0)).abs() < 1e-12);
        assert_eq!(&pt[..3], &[0.0; 3]);

        let ufl = gen_ufl(2, 2, 1, 3).unwrap();
        let inst = Instance::Ufl(ufl.clone());
        let p = inst.to_separable().unwrap();
        let g = ufl.function();
        // integral point: facility 0 serves everyone
        let mut a = vec![0.0; p.n_vars()];
        a[0] = 1.0;
        a[ufl.w_index(0, 0)] = 1.0;
        a[ufl.w_index(0, 1)] = 1.0;
        a[ufl.s_index(0, 0)] = g.value(1.0);
        a[ufl.s_index(0, 1)] = g.value(1.0);
        a[ufl.s_index(1, 0)] = g.value(0.0);
        a[ufl.s_index(1, 1)] = g.value(0.0);
        let (pt, obj) = inst.evaluate_and_repair(&a).unwrap();
        assert_eq!(pt, a);
        let (_, robj) = inst.relaxed_repair(&p, &a).unwrap();
        assert!(robj <= obj + 1e-12);
        assert!((obj - (ufl.fixed_costs[0] + 2.0 * g.value(1.0))).abs() < 1e-12);
        assert!(inst.original_violation(&p, &pt) < 1e-9);
        assert!(inst.evaluate_and_repair(&vec![0.0; p.n_vars()]).is_err());
    }

    #[test]
    fn split_of_a_concave_cost_is_single_sourcing() {
        let g = |w: f64| w.sqrt();
        let (c, s) = best_split(&g, 3);
        assert!((c - 1.0).abs() < 1e-12);
        assert_eq!(s, vec![1.0, 0.0, 0.0]);
        let g = |w: f64| w * w;
        let (c, s) = best_split(&g, 4);
        assert!((c - 0.25).abs() < 1e-9, "{c}");
        assert!(s.iter().all(|&w| (w - 0.25).abs() < 1e-6));
    }

    #[test]
    fn constructed_ufl_point_is_feasible() {
        let u = gen_ufl(4, 5, 3, 2).unwrap();
        let g = u.function();
        let inst = Instance::Ufl(u);
        let p = inst.to_separable().unwrap();
        let (pt, obj) = inst.construct(&|w| g.value(w)).unwrap();
        assert!(inst.original_violation(&p, &pt) < 1e-9);
        assert!((obj - inst.evaluate_original(&pt)).abs() < 1e-9);
        let (rpt, robj) = inst.evaluate_and_repair(&pt).unwrap();
        assert!(inst.original_violation(&p, &rpt) < 1e-9);
        assert!(robj <= obj + 1e-9);
    }

    #[test]
    fn instance_json_round_trip() {
        let inst = Instance::Nck(gen_nck(4, NckFamily::Logistic, 11).unwrap());
        let s = serde_json::to_string(&inst).unwrap();
        assert!(s.contains("\"problem\":\"nck\""));
        assert_eq!(serde_json::from_str::<Instance>(&s).unwrap(), inst);
    }

    #[test]
    fn refine_splits_the_concave_segment() {
        let f = UnivariateFunction::sine(-1.0, 1.0, 0.0);
        let tau = 2.0 * std::f64::consts::PI;
        let d = decompose(&f, 0.0, tau).unwrap();
        let r = refine_intervals(&d, &f, 1.5 * std::f64::consts::PI).unwrap();
        assert_eq!(r.segment_count(), 3);
        assert_eq!(r.lower(), 0.0);
        assert_eq!(r.upper(), tau);
    }
}
