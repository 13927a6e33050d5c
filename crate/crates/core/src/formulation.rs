//! Incremental (IM), multiple-choice (MCM) and convex-combination (CCM)
//! models of a separable problem whose univariate terms have been split into
//! convex and concave segments.
//!
//! Each `(constraint, variable)` pair carrying a nonlinear term becomes a
//! [`Block`]. Concave segments enter the constraint row through their secant;
//! convex segments get an epigraph variable `z` tied to a [`PerspectiveTerm`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::univariate::{decompose, DecomposeError, PiecewiseDecomposition, UnivariateFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveSense {
    /// Stored objective is the reported one.
    #[default]
    Minimize,
    /// Stored objective is the negation of a maximisation objective.
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearTerm {
    pub var: usize,
    pub func: UnivariateFunction,
    #[serde(default)]
    pub decomposition: Option<PiecewiseDecomposition>,
}

/// `linear · x + sum g(x_j)  (sense)  rhs`. Nonlinear terms are only allowed
/// in `Le` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub linear: Vec<(usize, f64)>,
    pub terms: Vec<NonlinearTerm>,
    pub sense: RowSense,
    pub rhs: f64,
}

/// Linear objective, linear-plus-separable constraints, bounds and
/// integrality. The objective is always stored in minimisation form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableProblem {
    pub var_names: Vec<String>,
    pub objective: Vec<f64>,
    pub sense: ObjectiveSense,
    pub integer: Vec<bool>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormulationError {
    #[error("constraint {constraint}: term on variable {var} has no decomposition")]
    MissingDecomposition { constraint: usize, var: usize },
    #[error("constraint {constraint}: term on variable {var} has no segments")]
    NoSegments { constraint: usize, var: usize },
    #[error("variable {var} carries a nonlinear term but has an infinite bound")]
    UnboundedNonlinearVar { var: usize },
    #[error("constraint {0}: nonlinear terms are only allowed in <= rows")]
    NonlinearInNonLeRow(usize),
    #[error("decomposition of variable {var}: {source}")]
    Decompose { var: usize, source: DecomposeError },
    #[error("the plain (non-perspective) variant is only defined for the incremental model")]
    PlainUnsupported,
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
    #[error("input assignment is infeasible: {0}")]
    InfeasibleInput(String),
}

impl SeparableProblem {
    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    /// Empty problem over `n` continuous variables with the given bounds.
    pub fn with_vars(names: Vec<String>, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        let n = names.len();
        Self {
            var_names: names,
            objective: vec![0.0; n],
            sense: ObjectiveSense::Minimize,
            integer: vec![false; n],
            lower,
            upper,
            constraints: Vec::new(),
        }
    }

    /// `min t  s.t.  g(x) - t <= 0,  l <= x <= u`; variable 0 is `x`, 1 is `t`.
    pub fn epigraph(g: UnivariateFunction, l: f64, u: f64) -> Self {
        let mut p = Self::with_vars(
            vec!["x".into(), "t".into()],
            vec![l, f64::NEG_INFINITY],
            vec![u, f64::INFINITY],
        );
        p.objective[1] = 1.0;
        p.constraints.push(Constraint {
            name: "epi".into(),
            linear: vec![(1, -1.0)],
            terms: vec![NonlinearTerm {
                var: 0,
                func: g,
                decomposition: None,
            }],
            sense: RowSense::Le,
            rhs: 0.0,
        });
        p
    }

    /// Fills every missing decomposition with [`decompose`] over the variable's bounds.
    pub fn decompose_all(&mut self) -> Result<(), FormulationError> {
        for c in &mut self.constraints {
            for t in &mut c.terms {
                if t.decomposition.is_some() {
                    continue;
                }
                let (l, u) = (self.lower[t.var], self.upper[t.var]);
                if !l.is_finite() || !u.is_finite() {
                    return Err(FormulationError::UnboundedNonlinearVar { var: t.var });
                }
                t.decomposition =
                    Some(decompose(&t.func, l, u).map_err(|source| FormulationError::Decompose { var: t.var, source })?);
            }
        }
        Ok(())
    }

    pub fn decomposed(mut self) -> Result<Self, FormulationError> {
        self.decompose_all()?;
        Ok(self)
    }

    fn check_ready(&self) -> Result<(), FormulationError> {
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.terms.is_empty() && c.sense != RowSense::Le {
                return Err(FormulationError::NonlinearInNonLeRow(i));
            }
            for t in &c.terms {
                if !self.lower[t.var].is_finite() || !self.upper[t.var].is_finite() {
                    return Err(FormulationError::UnboundedNonlinearVar { var: t.var });
                }
                let d = t.decomposition.as_ref().ok_or(FormulationError::MissingDecomposition {
                    constraint: i,
                    var: t.var,
                })?;
                if d.segment_count() == 0 {
                    return Err(FormulationError::NoSegments { constraint: i, var: t.var });
                }
            }
        }
        Ok(())
    }

    /// Linear part plus exact `g` at `x`, minus the rhs (the row value in `<=`/`=` form).
    pub fn row_activity(&self, i: usize, x: &[f64]) -> f64 {
        let c = &self.constraints[i];
        let lin: f64 = c.linear.iter().map(|&(j, a)| a * x[j]).sum();
        let nl: f64 = c.terms.iter().map(|t| t.func.value(x[t.var])).sum();
        lin + nl - c.rhs
    }

    /// Same as [`row_activity`](Self::row_activity) with every `g` replaced by
    /// its piecewise-convex relaxation. Requires decompositions.
    pub fn relaxed_row_activity(&self, i: usize, x: &[f64]) -> f64 {
        let c = &self.constraints[i];
        let lin: f64 = c.linear.iter().map(|&(j, a)| a * x[j]).sum();
        let nl: f64 = c
            .terms
            .iter()
            .map(|t| {
                let d = t.decomposition.as_ref().expect("decomposed problem");
                let v = x[t.var].clamp(d.lower(), d.upper());
                d.relaxed_eval(&t.func, v).expect("clamped into domain")
            })
            .sum();
        lin + nl - c.rhs
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of bounds, rows and integrality at `x`.
    pub fn max_violation(&self, x: &[f64], relaxed: bool) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.n_vars() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
            if self.integer[j] {
                worst = worst.max((x[j] - x[j].round()).abs());
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            let a = if relaxed {
                self.relaxed_row_activity(i, x)
            } else {
                self.row_activity(i, x)
            };
            worst = worst.max(match c.sense {
                RowSense::Le => a,
                RowSense::Ge => -a,
                RowSense::Eq => a.abs(),
            });
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    Im,
    Mcm,
    Ccm,
}

impl Formulation {
    pub fn label(self) -> &'static str {
        match self {
            Formulation::Im => "IM",
            Formulation::Mcm => "MCM",
            Formulation::Ccm => "CCM",
        }
    }
}

impl std::str::FromStr for Formulation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "im" => Ok(Formulation::Im),
            "mcm" => Ok(Formulation::Mcm),
            "ccm" => Ok(Formulation::Ccm),
            other => Err(format!("unknown formulation '{other}' (expected im, mcm or ccm)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strengthening {
    Perspective,
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
    Integer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub fixed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * values[j]).sum()
    }

    pub fn violation(&self, values: &[f64]) -> f64 {
        let a = self.activity(values) - self.rhs;
        match self.sense {
            RowSense::Le => a.max(0.0),
            RowSense::Ge => (-a).max(0.0),
            RowSense::Eq => a.abs(),
        }
    }
}

/// `z >= y * [g(anchor + x / y) - g(anchor)]` (perspective form) or
/// `z >= g(anchor + x) - g(anchor)` (plain form). The per-unit point
/// `anchor + x / y` (resp. `anchor + x`) ranges over `[q_lo, q_hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerspectiveTerm {
    pub func: UnivariateFunction,
    pub anchor: f64,
    pub q_lo: f64,
    pub q_hi: f64,
    pub x: usize,
    pub y: usize,
    pub z: usize,
    /// `g(anchor)`.
    pub offset: f64,
    pub perspective: bool,
    pub block: usize,
    pub segment: usize,
}

impl PerspectiveTerm {
    /// Exact value of the right-hand side at `(x, y)`. For `y <= 0` the
    /// perspective is taken as its closure value 0.
    pub fn value(&self, x: f64, y: f64) -> f64 {
        if self.perspective {
            if y <= 0.0 {
                return 0.0;
            }
            let q = (self.anchor + x / y).clamp(self.q_lo, self.q_hi);
            y * (self.func.value(q) - self.offset)
        } else {
            let q = (self.anchor + x).clamp(self.q_lo, self.q_hi);
            self.func.value(q) - self.offset
        }
    }

    /// Range of `g(q) - g(anchor)` over the per-unit domain, assuming `g`
    /// convex there.
    pub fn unit_range(&self) -> (f64, f64) {
        let h = |q: f64| self.func.value(q) - self.offset;
        let (a, b) = (self.q_lo, self.q_hi);
        let max = h(a).max(h(b));
        let d = |q: f64| self.func.derivative(q);
        let argmin = if d(a) >= 0.0 {
            a
        } else if d(b) <= 0.0 {
            b
        } else {
            let (mut lo, mut hi) = (a, b);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if d(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        (h(argmin).min(h(a)).min(h(b)), max)
    }
}

/// Variables of one segment inside a block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentVars {
    pub x: usize,
    pub y: usize,
    pub z: Option<usize>,
    /// CCM convex-combination weights on `l^s` and `l^{s+1}`.
    pub mu: Option<usize>,
    pub lambda: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub constraint: usize,
    pub var: usize,
    pub func: UnivariateFunction,
    pub decomposition: PiecewiseDecomposition,
    pub segments: Vec<SegmentVars>,
    /// Row index of the model constraint this block feeds.
    pub row: usize,
    /// Constant moved to the row's rhs on behalf of this block.
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub formulation: Formulation,
    pub strengthening: Strengthening,
    pub sense: ObjectiveSense,
    pub variables: Vec<Variable>,
    pub rows: Vec<Row>,
    pub objective: Vec<(usize, f64)>,
    pub terms: Vec<PerspectiveTerm>,
    pub blocks: Vec<Block>,
    /// Model variables `0..n_original` are the problem's variables.
    pub n_original: usize,
    /// Model row index of every problem constraint.
    pub constraint_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub values: Vec<f64>,
    pub objective: f64,
}

impl Model {
    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    fn add_var(&mut self, name: String, kind: VarKind, lower: f64, upper: f64) -> usize {
        self.variables.push(Variable {
            name,
            kind,
            lower,
            upper,
            fixed: false,
        });
        self.variables.len() - 1
    }

    fn add_row(&mut self, name: String, coeffs: Vec<(usize, f64)>, sense: RowSense, rhs: f64) -> usize {
        self.rows.push(Row {
            name,
            coeffs,
            sense,
            rhs,
        });
        self.rows.len() - 1
    }

    /// Binary or integer variables that are not fixed.
    pub fn free_integer_vars(&self) -> Vec<usize> {
        (0..self.n_vars())
            .filter(|&j| self.variables[j].kind != VarKind::Continuous && !self.variables[j].fixed)
            .collect()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, c)| c * values[j]).sum()
    }

    pub fn assignment(&self, values: Vec<f64>) -> Assignment {
        let objective = self.objective_value(&values);
        Assignment { values, objective }
    }

    /// Largest violation of bounds, linear rows and perspective terms (exact
    /// nonlinear check). With `integral`, integer variables must be integral.
    pub fn max_violation(&self, values: &[f64], integral: bool) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, v) in self.variables.iter().enumerate() {
            worst = worst.max(v.lower - values[j]).max(values[j] - v.upper);
            if integral && v.kind != VarKind::Continuous {
                worst = worst.max((values[j] - values[j].round()).abs());
            }
        }
        for r in &self.rows {
            worst = worst.max(r.violation(values));
        }
        for t in &self.terms {
            worst = worst.max(t.value(values[t.x], values[t.y]) - values[t.z]);
            if t.perspective {
                // per-unit point must stay inside the domain
                let (x, y) = (values[t.x], values[t.y]);
                let lo = (t.q_lo - t.anchor) * y;
                let hi = (t.q_hi - t.anchor) * y;
                worst = worst.max(lo - x).max(x - hi);
            }
        }
        worst
    }

    /// Value of block `b`'s share of its constraint row, constant included.
    pub fn block_contribution(&self, b: usize, values: &[f64]) -> f64 {
        let block = &self.blocks[b];
        let owned: Vec<usize> = block
            .segments
            .iter()
            .flat_map(|s| [Some(s.x), Some(s.y), s.z].into_iter().flatten())
            .collect();
        let row = &self.rows[block.row];
        block.constant
            + row
                .coeffs
                .iter()
                .filter(|(j, _)| owned.contains(j))
                .map(|&(j, a)| a * values[j])
                .sum::<f64>()
    }
}

fn z_bounds(term: &PerspectiveTerm) -> (f64, f64) {
    let (lo, hi) = term.unit_range();
    let lo = lo.min(0.0);
    let hi = hi.max(0.0);
    (lo - 1e-6 * (1.0 + lo.abs()), hi + 1e-6 * (1.0 + hi.abs()))
}

struct Builder<'a> {
    p: &'a SeparableProblem,
    m: Model,
}

impl<'a> Builder<'a> {
    fn new(p: &'a SeparableProblem, formulation: Formulation, strengthening: Strengthening) -> Result<Self, FormulationError> {
        p.check_ready()?;
        let mut m = Model {
            formulation,
            strengthening,
            sense: p.sense,
            variables: Vec::new(),
            rows: Vec::new(),
            objective: Vec::new(),
            terms: Vec::new(),
            blocks: Vec::new(),
            n_original: p.n_vars(),
            constraint_rows: Vec::new(),
        };
        for j in 0..p.n_vars() {
            let kind = if p.integer[j] {
                if p.lower[j] >= 0.0 && p.upper[j] <= 1.0 {
                    VarKind::Binary
                } else {
                    VarKind::Integer
                }
            } else {
                VarKind::Continuous
            };
            m.add_var(p.var_names[j].clone(), kind, p.lower[j], p.upper[j]);
            if p.objective[j] != 0.0 {
                m.objective.push((j, p.objective[j]));
            }
        }
        for (i, c) in p.constraints.iter().enumerate() {
            let r = m.add_row(c.name.clone(), c.linear.clone(), c.sense, c.rhs);
            m.constraint_rows.push(r);
            let _ = i;
        }
        Ok(Self { p, m })
    }

    fn push_term(&mut self, row: usize, term: PerspectiveTerm) -> usize {
        let (lo, hi) = z_bounds(&term);
        let z = term.z;
        self.m.variables[z].lower = lo;
        self.m.variables[z].upper = hi;
        self.m.rows[row].coeffs.push((z, 1.0));
        self.m.terms.push(term);
        z
    }

    fn blocks(&self) -> Vec<(usize, usize, UnivariateFunction, PiecewiseDecomposition)> {
        let mut out = Vec::new();
        for (i, c) in self.p.constraints.iter().enumerate() {
            for t in &c.terms {
                out.push((i, t.var, t.func.clone(), t.decomposition.clone().unwrap()));
            }
        }
        out
    }
}

/// Incremental model with `y^1` fixed to one.
pub fn build_im(p: &SeparableProblem, strengthening: Strengthening) -> Result<Model, FormulationError> {
    build_im_with(p, strengthening, true)
}

/// Incremental model; `fix_first = false` leaves `y^1` a free binary.
pub fn build_im_with(p: &SeparableProblem, strengthening: Strengthening, fix_first: bool) -> Result<Model, FormulationError> {
    let mut b = Builder::new(p, Formulation::Im, strengthening)?;
    for (i, j, g, d) in b.blocks() {
        let row = b.m.constraint_rows[i];
        let block_id = b.m.blocks.len();
        let n_seg = d.segment_count();
        let mut segs = Vec::with_capacity(n_seg);
        for s in 0..n_seg {
            let (lo, hi) = d.segment(s);
            let x = b.m.add_var(format!("x_{i}_{j}_{s}"), VarKind::Continuous, 0.0, hi - lo);
            let y = b.m.add_var(format!("y_{i}_{j}_{s}"), VarKind::Binary, 0.0, 1.0);
            if s == 0 && fix_first {
                let v = &mut b.m.variables[y];
                v.lower = 1.0;
                v.fixed = true;
            }
            segs.push(SegmentVars {
                x,
                y,
                z: None,
                mu: None,
                lambda: None,
            });
        }
        // x_j = l_j + sum_s x^s
        let mut coeffs = vec![(j, 1.0)];
        coeffs.extend(segs.iter().map(|s| (s.x, -1.0)));
        b.m.add_row(format!("def_{i}_{j}"), coeffs, RowSense::Eq, d.lower());
        // (l^{s+1} - l^s) y^{s+1} <= x^s <= (l^{s+1} - l^s) y^s
        for s in 0..n_seg {
            let (lo, hi) = d.segment(s);
            let len = hi - lo;
            b.m.add_row(
                format!("ub_{i}_{j}_{s}"),
                vec![(segs[s].x, 1.0), (segs[s].y, -len)],
                RowSense::Le,
                0.0,
            );
            if s + 1 < n_seg {
                b.m.add_row(
                    format!("lb_{i}_{j}_{s}"),
                    vec![(segs[s + 1].y, len), (segs[s].x, -1.0)],
                    RowSense::Le,
                    0.0,
                );
            }
        }
        let constant = g.value(d.lower());
        b.m.rows[row].rhs -= constant;
        for s in 0..n_seg {
            let (lo, hi) = d.segment(s);
            if d.kinds[s].is_convex() {
                let z = b.m.add_var(format!("z_{i}_{j}_{s}"), VarKind::Continuous, 0.0, 0.0);
                segs[s].z = Some(z);
                let term = PerspectiveTerm {
                    func: g.clone(),
                    anchor: lo,
                    q_lo: lo,
                    q_hi: hi,
                    x: segs[s].x,
                    y: segs[s].y,
                    z,
                    offset: g.value(lo),
                    perspective: strengthening == Strengthening::Perspective,
                    block: block_id,
                    segment: s,
                };
                b.push_term(row, term);
            } else {
                b.m.rows[row].coeffs.push((segs[s].x, d.secant_slopes[s]));
            }
        }
        b.m.blocks.push(Block {
            constraint: i,
            var: j,
            func: g,
            decomposition: d,
            segments: segs,
            row,
            constant,
        });
    }
    Ok(b.m)
}

fn build_choice(p: &SeparableProblem, formulation: Formulation) -> Result<Model, FormulationError> {
    let mut b = Builder::new(p, formulation, Strengthening::Perspective)?;
    let ccm = formulation == Formulation::Ccm;
    for (i, j, g, d) in b.blocks() {
        let row = b.m.constraint_rows[i];
        let block_id = b.m.blocks.len();
        let n_seg = d.segment_count();
        let g0 = g.value(0.0);
        let mut segs = Vec::with_capacity(n_seg);
        for s in 0..n_seg {
            let (lo, hi) = d.segment(s);
            let x = b
                .m
                .add_var(format!("x_{i}_{j}_{s}"), VarKind::Continuous, lo.min(0.0), hi.max(0.0));
            let y = b.m.add_var(format!("y_{i}_{j}_{s}"), VarKind::Binary, 0.0, 1.0);
            let (mu, lambda) = if ccm {
                let mu = b.m.add_var(format!("mu_{i}_{j}_{s}"), VarKind::Continuous, 0.0, 1.0);
                let lambda = b.m.add_var(format!("lambda_{i}_{j}_{s}"), VarKind::Continuous, 0.0, 1.0);
                (Some(mu), Some(lambda))
            } else {
                (None, None)
            };
            segs.push(SegmentVars {
                x,
                y,
                z: None,
                mu,
                lambda,
            });
        }
        let mut coeffs = vec![(j, 1.0)];
        coeffs.extend(segs.iter().map(|s| (s.x, -1.0)));
        b.m.add_row(format!("def_{i}_{j}"), coeffs, RowSense::Eq, 0.0);
        for (s, sv) in segs.iter().enumerate() {
            let (lo, hi) = d.segment(s);
            if ccm {
                let (mu, lambda) = (sv.mu.unwrap(), sv.lambda.unwrap());
                b.m.add_row(
                    format!("cc_{i}_{j}_{s}"),
                    vec![(sv.x, 1.0), (mu, -lo), (lambda, -hi)],
                    RowSense::Eq,
                    0.0,
                );
                b.m.add_row(
                    format!("cw_{i}_{j}_{s}"),
                    vec![(sv.y, 1.0), (mu, -1.0), (lambda, -1.0)],
                    RowSense::Eq,
                    0.0,
                );
            } else {
                b.m.add_row(
                    format!("lb_{i}_{j}_{s}"),
                    vec![(sv.y, lo), (sv.x, -1.0)],
                    RowSense::Le,
                    0.0,
                );
                b.m.add_row(
                    format!("ub_{i}_{j}_{s}"),
                    vec![(sv.x, 1.0), (sv.y, -hi)],
                    RowSense::Le,
                    0.0,
                );
            }
        }
        b.m.add_row(
            format!("choice_{i}_{j}"),
            segs.iter().map(|s| (s.y, 1.0)).collect(),
            RowSense::Eq,
            1.0,
        );
        for s in 0..n_seg {
            let (lo, hi) = d.segment(s);
            if d.kinds[s].is_convex() {
                let z = b.m.add_var(format!("z_{i}_{j}_{s}"), VarKind::Continuous, 0.0, 0.0);
                segs[s].z = Some(z);
                b.m.rows[row].coeffs.push((segs[s].y, g0));
                let term = PerspectiveTerm {
                    func: g.clone(),
                    anchor: 0.0,
                    q_lo: lo,
                    q_hi: hi,
                    x: segs[s].x,
                    y: segs[s].y,
                    z,
                    offset: g0,
                    perspective: true,
                    block: block_id,
                    segment: s,
                };
                b.push_term(row, term);
            } else {
                let alpha = d.secant_slopes[s];
                b.m.rows[row].coeffs.push((segs[s].x, alpha));
                b.m.rows[row].coeffs.push((segs[s].y, g.value(lo) - alpha * lo));
            }
        }
        b.m.blocks.push(Block {
            constraint: i,
            var: j,
            func: g,
            decomposition: d,
            segments: segs,
            row,
            constant: 0.0,
        });
    }
    Ok(b.m)
}

/// Multiple-choice model. Only the perspective form is defined.
pub fn build_mcm(p: &SeparableProblem, strengthening: Strengthening) -> Result<Model, FormulationError> {
    if strengthening == Strengthening::Plain {
        return Err(FormulationError::PlainUnsupported);
    }
    build_choice(p, Formulation::Mcm)
}

/// Convex-combination model: MCM with every `x^s = l^s mu^s + l^{s+1} lambda^s`
/// and `y^s = mu^s + lambda^s`.
pub fn build_ccm(p: &SeparableProblem) -> Result<Model, FormulationError> {
    build_choice(p, Formulation::Ccm)
}

pub fn build(p: &SeparableProblem, formulation: Formulation, strengthening: Strengthening) -> Result<Model, FormulationError> {
    match formulation {
        Formulation::Im => build_im(p, strengthening),
        Formulation::Mcm => build_mcm(p, strengthening),
        Formulation::Ccm => {
            if strengthening == Strengthening::Plain {
                return Err(FormulationError::PlainUnsupported);
            }
            build_ccm(p)
        }
    }
}

const MAP_TOL: f64 = 1e-7;

fn check_pair(a: &Model, b: &Model, from: Formulation, to: Formulation) -> Result<(), FormulationError> {
    if a.formulation != from || b.formulation != to {
        return Err(FormulationError::ModelMismatch(format!(
            "expected {} -> {}, got {} -> {}",
            from.label(),
            to.label(),
            a.formulation.label(),
            b.formulation.label()
        )));
    }
    if a.blocks.len() != b.blocks.len() || a.n_original != b.n_original {
        return Err(FormulationError::ModelMismatch("models built from different problems".into()));
    }
    for (ba, bb) in a.blocks.iter().zip(&b.blocks) {
        if ba.segments.len() != bb.segments.len() {
            return Err(FormulationError::ModelMismatch("segment counts differ".into()));
        }
    }
    Ok(())
}

/// Maps a (relaxed) MCM point to the CCM point with the same `x`, `y`, `z`.
pub fn map_mcm_to_ccm(a: &Assignment, mcm: &Model, ccm: &Model) -> Result<Assignment, FormulationError> {
    check_pair(mcm, ccm, Formulation::Mcm, Formulation::Ccm)?;
    let mut values = vec![0.0; ccm.n_vars()];
    values[..mcm.n_original].copy_from_slice(&a.values[..mcm.n_original]);
    for (bm, bc) in mcm.blocks.iter().zip(&ccm.blocks) {
        for (s, (sm, sc)) in bm.segments.iter().zip(&bc.segments).enumerate() {
            let (lo, hi) = bm.decomposition.segment(s);
            let x = a.values[sm.x];
            let y = a.values[sm.y];
            if x < lo * y - MAP_TOL || x > hi * y + MAP_TOL {
                return Err(FormulationError::InfeasibleInput(format!(
                    "segment load {x} outside [{}, {}]",
                    lo * y,
                    hi * y
                )));
            }
            values[sc.x] = x;
            values[sc.y] = y;
            if let (Some(zm), Some(zc)) = (sm.z, sc.z) {
                values[zc] = a.values[zm];
            }
            values[sc.mu.unwrap()] = (hi * y - x) / (hi - lo);
            values[sc.lambda.unwrap()] = (x - lo * y) / (hi - lo);
        }
    }
    Ok(ccm.assignment(values))
}

/// Maps a (relaxed) IM point to an MCM point with the same original values:
/// `y^s = psi^s - psi^{s+1}`, `x^s = phi^s + l^s psi^s - l^{s+1} psi^{s+1}`,
/// `z^s` recomputed from the perspective.
pub fn map_im_to_mcm(a: &Assignment, im: &Model, mcm: &Model) -> Result<Assignment, FormulationError> {
    check_pair(im, mcm, Formulation::Im, Formulation::Mcm)?;
    let viol = im.max_violation(&a.values, false);
    if viol > MAP_TOL {
        return Err(FormulationError::InfeasibleInput(format!("IM violation {viol:e}")));
    }
    let mut values = vec![0.0; mcm.n_vars()];
    values[..im.n_original].copy_from_slice(&a.values[..im.n_original]);
    for (bi, bm) in im.blocks.iter().zip(&mcm.blocks) {
        let d = &bi.decomposition;
        let n = bi.segments.len();
        let psi = |s: usize| if s < n { a.values[bi.segments[s].y] } else { 0.0 };
        for s in 0..n {
            let phi = a.values[bi.segments[s].x];
            let (lo, hi) = d.segment(s);
            let y = psi(s) - psi(s + 1);
            let x = phi + lo * psi(s) - hi * psi(s + 1);
            let sm = &bm.segments[s];
            values[sm.y] = y;
            values[sm.x] = x;
            if let Some(z) = sm.z {
                let term = mcm.terms.iter().find(|t| t.z == z).expect("term for z");
                values[z] = term.value(x, y);
            }
        }
    }
    Ok(mcm.assignment(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn neg_sin_problem() -> SeparableProblem {
        SeparableProblem::epigraph(UnivariateFunction::sine(-1.0, 1.0, 0.0), 0.0, 2.0 * PI)
            .decomposed()
            .unwrap()
    }

    #[test]
    fn im_structure_for_neg_sin() {
        let m = build_im(&neg_sin_problem(), Strengthening::Perspective).unwrap();
        assert_eq!(m.blocks.len(), 1);
        let b = &m.blocks[0];
        assert_eq!(b.segments.len(), 2);
        assert!(b.segments[0].z.is_some() && b.segments[1].z.is_none());
        assert!(m.variables[b.segments[0].y].fixed);
        assert_eq!(m.free_integer_vars(), vec![b.segments[1].y]);
        assert_eq!(m.terms.len(), 1);
        assert!(b.constant.abs() < 1e-15);
        // concave secant slope is zero
        let row = &m.rows[b.row];
        let coef = row.coeffs.iter().find(|(j, _)| *j == b.segments[1].x).unwrap().1;
        assert!(coef.abs() < 1e-15);
    }

    #[test]
    fn mcm_structure_for_neg_sin() {
        let m = build_mcm(&neg_sin_problem(), Strengthening::Perspective).unwrap();
        let b = &m.blocks[0];
        assert_eq!(m.free_integer_vars().len(), 2);
        let choice = m.rows.iter().find(|r| r.name.starts_with("choice")).unwrap();
        assert_eq!(choice.rhs, 1.0);
        assert_eq!(choice.coeffs.len(), 2);
        assert_eq!(m.terms[0].anchor, 0.0);
        assert_eq!((m.terms[0].q_lo, m.terms[0].q_hi), b.decomposition.segment(0));
        assert!(build_mcm(&neg_sin_problem(), Strengthening::Plain).is_err());
    }

    #[test]
    fn ccm_endpoint_substitution() {
        let p = neg_sin_problem();
        let m = build_ccm(&p).unwrap();
        let b = &m.blocks[0];
        let (lo, hi) = b.decomposition.segment(1);
        let sv = &b.segments[1];
        let cc = m.rows.iter().find(|r| r.name == "cc_0_0_1").unwrap();
        let mut v = vec![0.0; m.n_vars()];
        v[sv.y] = 1.0;
        v[sv.mu.unwrap()] = 1.0;
        v[sv.x] = lo;
        assert!(cc.violation(&v) < 1e-12);
        v[sv.mu.unwrap()] = 0.0;
        v[sv.lambda.unwrap()] = 1.0;
        v[sv.x] = hi;
        assert!(cc.violation(&v) < 1e-12);
    }

    #[test]
    fn missing_decomposition_is_an_error() {
        let p = SeparableProblem::epigraph(UnivariateFunction::sine(1.0, 1.0, 0.0), 0.0, 1.0);
        assert!(matches!(
            build_im(&p, Strengthening::Perspective),
            Err(FormulationError::MissingDecomposition { .. })
        ));
    }

    #[test]
    fn im_to_mcm_first_segment_only() {
        let p = SeparableProblem::epigraph(UnivariateFunction::sine(1.0, 1.0, 0.0), 0.0, 2.0 * PI)
            .decomposed()
            .unwrap();
        let im = build_im(&p, Strengthening::Perspective).unwrap();
        let mcm = build_mcm(&p, Strengthening::Perspective).unwrap();
        let b = &im.blocks[0];
        let t = 1.3;
        let mut v = vec![0.0; im.n_vars()];
        v[0] = t;
        v[b.segments[0].y] = 1.0;
        v[b.segments[0].x] = t;
        v[1] = im.block_contribution(0, &v);
        let a = im.assignment(v);
        let out = map_im_to_mcm(&a, &im, &mcm).unwrap();
        let bm = &mcm.blocks[0];
        assert!((out.values[bm.segments[0].y] - 1.0).abs() < 1e-15);
        assert!((out.values[bm.segments[0].x] - t).abs() < 1e-15);
        assert_eq!(out.values[bm.segments[1].x], 0.0);
    }

    #[test]
    fn im_to_mcm_telescoping_collapse() {
        let p = SeparableProblem::epigraph(UnivariateFunction::sine(1.0, 1.0, 0.0), 0.0, 2.0 * PI)
            .decomposed()
            .unwrap();
        let im = build_im(&p, Strengthening::Perspective).unwrap();
        let mcm = build_mcm(&p, Strengthening::Perspective).unwrap();
        let b = &im.blocks[0];
        let l2 = b.decomposition.breakpoints[1];
        let t = 0.7;
        let mut v = vec![0.0; im.n_vars()];
        v[b.segments[0].y] = 1.0;
        v[b.segments[1].y] = 1.0;
        v[b.segments[0].x] = l2;
        v[b.segments[1].x] = t;
        v[0] = l2 + t;
        let z = b.segments[1].z.unwrap();
        v[z] = im.terms[0].value(t, 1.0);
        v[1] = im.block_contribution(0, &v);
        let out = map_im_to_mcm(&im.assignment(v), &im, &mcm).unwrap();
        let bm = &mcm.blocks[0];
        assert!(out.values[bm.segments[0].y].abs() < 1e-15);
        assert!((out.values[bm.segments[1].y] - 1.0).abs() < 1e-15);
        assert!((out.values[bm.segments[1].x] - (t + l2)).abs() < 1e-12);
        assert!(mcm.max_violation(&out.values, true) < 1e-9);
    }

    #[test]
    fn mcm_to_ccm_weights() {
        let p = neg_sin_problem();
        let mcm = build_mcm(&p, Strengthening::Perspective).unwrap();
        let ccm = build_ccm(&p).unwrap();
        let b = &mcm.blocks[0];
        let (lo, hi) = b.decomposition.segment(1);
        let mut v = vec![0.0; mcm.n_vars()];
        v[b.segments[1].y] = 0.5;
        v[b.segments[1].x] = 0.5 * (lo + hi) / 2.0;
        v[0] = v[b.segments[1].x];
        let out = map_mcm_to_ccm(&mcm.assignment(v), &mcm, &ccm).unwrap();
        let sc = &ccm.blocks[0].segments[1];
        assert!((out.values[sc.mu.unwrap()] - 0.25).abs() < 1e-12);
        assert!((out.values[sc.lambda.unwrap()] - 0.25).abs() < 1e-12);

        let mut v = vec![0.0; mcm.n_vars()];
        v[b.segments[1].y] = 1.0;
        v[b.segments[1].x] = lo;
        let out = map_mcm_to_ccm(&mcm.assignment(v), &mcm, &ccm).unwrap();
        let sc = &ccm.blocks[0].segments[1];
        assert!((out.values[sc.mu.unwrap()] - 1.0).abs() < 1e-12);
        assert!(out.values[sc.lambda.unwrap()].abs() < 1e-12);
    }
}
