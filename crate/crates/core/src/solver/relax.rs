//! Continuous relaxation of a [`Model`] solved by LP plus perspective-cut
//! separation.

use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::lp::{scale_row, LpRow, LpStatus};
use super::simplex::{Basis, LpEngine};
use crate::cuts::{initial_cuts, separate, Cut, CutPool};
use crate::formulation::{Assignment, Model, ObjectiveSense, RowSense, VarKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branching {
    MostFractional,
    PseudoCost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeOrder {
    BestBound,
    DepthFirst,
}

impl FromStr for Branching {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "most-fractional" => Ok(Self::MostFractional),
            "pseudo-cost" => Ok(Self::PseudoCost),
            _ => Err(format!("unknown branching rule '{s}'")),
        }
    }
}

impl FromStr for NodeOrder {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "best-bound" => Ok(Self::BestBound),
            "depth-first" => Ok(Self::DepthFirst),
            _ => Err(format!("unknown node order '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub cut_eps: f64,
    pub eps_y: f64,
    pub max_root_rounds: usize,
    pub max_node_rounds: usize,
    pub time_limit_seconds: f64,
    pub node_limit: usize,
    pub branching: Branching,
    pub node_order: NodeOrder,
    pub initial_cut_k: usize,
    pub seed: u64,
    /// Relative optimality gap at which nodes are pruned.
    pub mip_gap: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            feas_tol: 1e-7,
            opt_tol: 1e-7,
            cut_eps: 1e-6,
            eps_y: 1e-6,
            max_root_rounds: 500,
            max_node_rounds: 50,
            time_limit_seconds: 10000.0,
            node_limit: 1_000_000,
            branching: Branching::MostFractional,
            node_order: NodeOrder::BestBound,
            initial_cut_k: 2,
            seed: 0,
            mip_gap: 1e-6,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("feas_tol", self.feas_tol),
            ("opt_tol", self.opt_tol),
            ("cut_eps", self.cut_eps),
            ("eps_y", self.eps_y),
            ("time_limit_seconds", self.time_limit_seconds),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if self.mip_gap < 0.0 {
            return Err(format!("mip_gap must be non-negative, got {}", self.mip_gap));
        }
        Ok(())
    }

    pub fn deadline(&self, start: Instant) -> Instant {
        start + Duration::from_secs_f64(self.time_limit_seconds.min(1e9))
    }
}

/// Outcome of one cutting-plane loop.
#[derive(Debug, Clone)]
pub struct RoundResult {
    pub status: LpStatus,
    /// LP value in minimization orientation.
    pub value: f64,
    pub values: Vec<f64>,
    pub rounds: usize,
    pub cuts_added: usize,
    pub converged: bool,
    /// LP value after each round.
    pub history: Vec<f64>,
}

/// LP engine plus cut pool over one model. Cuts are globally valid, so the
/// pool persists across bound changes.
#[derive(Debug, Clone)]
pub struct Relaxation<'m> {
    pub model: &'m Model,
    pub cfg: SolveConfig,
    pub pool: CutPool,
    engine: LpEngine,
    sign: f64,
    root_lo: Vec<f64>,
    root_hi: Vec<f64>,
}

impl<'m> Relaxation<'m> {
    pub fn new(model: &'m Model, cfg: &SolveConfig) -> Self {
        Self::with_pool(model, cfg, CutPool::new())
    }

    pub fn with_pool(model: &'m Model, cfg: &SolveConfig, pool: CutPool) -> Self {
        let sign = match model.sense {
            ObjectiveSense::Minimize => 1.0,
            ObjectiveSense::Maximize => -1.0,
        };
        let mut lp = super::lp::LinearProgram::new();
        for v in &model.variables {
            lp.add_var(0.0, v.lower, v.upper);
        }
        for &(j, c) in &model.objective {
            lp.cost[j] += sign * c;
        }
        for r in &model.rows {
            lp.add_row(&r.coeffs, r.sense, r.rhs);
        }
        let mut engine = LpEngine::new(&lp);
        engine.feas_tol = cfg.feas_tol.min(1e-9);
        engine.opt_tol = cfg.opt_tol.min(1e-9);
        let mut rel = Self {
            model,
            cfg: cfg.clone(),
            pool,
            engine,
            sign,
            root_lo: lp.lower.clone(),
            root_hi: lp.upper.clone(),
        };
        for i in 0..rel.pool.cuts.len() {
            let row = rel.cut_row(&rel.pool.cuts[i]);
            rel.engine.add_row(&row);
        }
        if cfg.initial_cut_k >= 2 {
            for (id, t) in model.terms.iter().enumerate() {
                if let Ok(cuts) = initial_cuts(t, id, cfg.initial_cut_k) {
                    for c in cuts {
                        rel.add_cut(c, 0);
                    }
                }
            }
        }
        rel
    }

    /// +1 for minimization models, -1 for maximization.
    pub fn sign(&self) -> f64 {
        self.sign
    }

    fn cut_row(&self, c: &Cut) -> LpRow {
        cut_row(self.model, c)
    }

    pub fn add_cut(&mut self, c: Cut, node: usize) -> bool {
        let row = self.cut_row(&c);
        if self.pool.insert(c, node) {
            self.engine.add_row(&row);
            true
        } else {
            false
        }
    }

    pub fn n_rows(&self) -> usize {
        self.engine.n_rows()
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.engine.set_bounds(j, lo, hi);
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.engine.lower(j), self.engine.upper(j))
    }

    pub fn root_bounds(&self, j: usize) -> (f64, f64) {
        (self.root_lo[j], self.root_hi[j])
    }

    pub fn reset_bounds(&mut self) {
        for j in 0..self.root_lo.len() {
            if self.engine.lower(j) != self.root_lo[j] || self.engine.upper(j) != self.root_hi[j] {
                self.engine.set_bounds(j, self.root_lo[j], self.root_hi[j]);
            }
        }
    }

    pub fn basis(&self) -> Basis {
        self.engine.basis()
    }

    pub fn set_basis(&mut self, b: &Basis) {
        self.engine.set_basis(b);
    }

    /// Solves the LP, separates every term, and repeats until no cut is
    /// violated by more than `cut_eps` or `max_rounds` rounds have added cuts.
    pub fn run(&mut self, max_rounds: usize, node: usize, deadline: Option<Instant>) -> RoundResult {
        let mut history = Vec::new();
        let mut rounds = 0;
        let mut cuts_added = 0;
        loop {
            let status: LpStatus = self.engine.solve().into();
            let values = self.engine.values();
            let value = self.engine.objective();
            if status != LpStatus::Optimal {
                return RoundResult {
                    status,
                    value,
                    values,
                    rounds,
                    cuts_added,
                    converged: false,
                    history,
                };
            }
            history.push(value);
            let mut added = 0;
            for (id, t) in self.model.terms.iter().enumerate() {
                let cut = separate(
                    t,
                    id,
                    values[t.x],
                    values[t.y],
                    values[t.z],
                    self.cfg.eps_y,
                    self.cfg.cut_eps,
                );
                if let Some(c) = cut {
                    if self.add_cut(c, node) {
                        added += 1;
                    }
                }
            }
            cuts_added += added;
            let timed_out = deadline.is_some_and(|d| Instant::now() >= d);
            if added == 0 || rounds >= max_rounds || timed_out {
                return RoundResult {
                    status,
                    value,
                    values,
                    rounds,
                    cuts_added,
                    converged: added == 0,
                    history,
                };
            }
            rounds += 1;
        }
    }
}

/// Scaled LP row of a cut: `z - coef_x x - coef_y y >= constant`.
pub fn cut_row(m: &Model, c: &Cut) -> LpRow {
    let t = &m.terms[c.term];
    let coeffs = [(t.z, 1.0), (t.x, -c.coef_x), (t.y, -c.coef_y)];
    let (coeffs, rhs) = scale_row(&coeffs, c.constant);
    LpRow {
        coeffs,
        sense: RowSense::Ge,
        rhs,
    }
}

/// Root relaxation result in the model's own objective orientation.
#[derive(Debug, Clone)]
pub struct RootRelaxation {
    pub status: LpStatus,
    pub bound: f64,
    pub assignment: Assignment,
    pub cuts_used: usize,
    pub rounds: usize,
    pub converged: bool,
    pub history: Vec<f64>,
}

/// Relaxes the binaries of `m` to `[0, 1]` (fixed ones stay fixed) and runs
/// the cutting-plane loop. `overrides` replace variable bounds.
pub fn solve_root_relaxation_with(
    m: &Model,
    cfg: &SolveConfig,
    overrides: &[(usize, f64, f64)],
) -> RootRelaxation {
    let mut rel = Relaxation::new(m, cfg);
    for &(j, lo, hi) in overrides {
        rel.set_bounds(j, lo, hi);
    }
    let deadline = cfg.deadline(Instant::now());
    let r = rel.run(cfg.max_root_rounds, 0, Some(deadline));
    let sign = rel.sign();
    RootRelaxation {
        status: r.status,
        bound: sign * r.value,
        assignment: m.assignment(r.values),
        cuts_used: rel.pool.len(),
        rounds: r.rounds,
        converged: r.converged,
        history: r.history.iter().map(|v| sign * v).collect(),
    }
}

pub fn solve_root_relaxation(m: &Model, cfg: &SolveConfig) -> RootRelaxation {
    solve_root_relaxation_with(m, cfg, &[])
}

/// Whether every integer variable of `m` is integral at `values`.
pub fn is_integral(m: &Model, values: &[f64], tol: f64) -> bool {
    m.variables
        .iter()
        .enumerate()
        .all(|(j, v)| v.kind == VarKind::Continuous || (values[j] - values[j].round()).abs() <= tol)
}
