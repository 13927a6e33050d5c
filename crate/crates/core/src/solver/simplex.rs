//! Bounded-variable revised primal simplex.
//!
//! Every row `r` carries a slack `s_r` (variable index `n + r`) so that
//! `a_r · x + s_r = b_r`, with `s_r >= 0` for `<=` rows, `s_r <= 0` for `>=`
//! rows and `s_r = 0` for equalities. The basis matrix is factored through
//! its structural kernel: with the basic slacks pinned to their own rows,
//! `B` is block triangular and only the square block of structural columns
//! on slack-free rows needs a (sparse) LU. Pivots between refactorizations are
//! kept as product-form eta vectors.

use serde::{Deserialize, Serialize};

use super::lp::{LinearProgram, LpRow};
use crate::formulation::RowSense;

const NONE: usize = usize::MAX;
const PIVOT_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-14;
const SINGULAR_TOL: f64 = 1e-10;
const REFACTOR_EVERY: usize = 80;
const BLAND_AFTER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarStatus {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free variable held at zero.
    Free,
}

/// Snapshot of a basis, restorable on a model with the same columns and at
/// least as many rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    pub n: usize,
    pub status: Vec<VarStatus>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericalFailure,
}

impl From<EngineStatus> for super::lp::LpStatus {
    fn from(s: EngineStatus) -> Self {
        use super::lp::LpStatus as L;
        match s {
            EngineStatus::Optimal => L::Optimal,
            EngineStatus::Infeasible => L::Infeasible,
            EngineStatus::Unbounded => L::Unbounded,
            EngineStatus::IterationLimit => L::IterationLimit,
            EngineStatus::NumericalFailure => L::NumericalFailure,
        }
    }
}

/// Sparse LU of a square block by right-looking elimination with Markowitz
/// pivot selection and threshold partial pivoting.
#[derive(Debug, Clone, Default)]
struct SparseLu {
    k: usize,
    /// Pivot row and column of each elimination step.
    prow: Vec<usize>,
    pcol: Vec<usize>,
    piv: Vec<f64>,
    /// Multipliers `(row, m)` of each step.
    l: Vec<Vec<(usize, f64)>>,
    /// Remaining pivot-row entries `(col, value)` of each step.
    u: Vec<Vec<(usize, f64)>>,
}

const THRESHOLD: f64 = 0.01;

impl SparseLu {
    /// Factors the matrix given by its columns (`(row, value)` lists). On
    /// rank deficiency returns the deficient columns and the rows left
    /// without a pivot.
    fn factor(columns: &[Vec<(usize, f64)>], k: usize) -> Result<Self, (Vec<usize>, Vec<usize>)> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (c, col) in columns.iter().enumerate() {
            for &(r, v) in col {
                if v != 0.0 {
                    rows[r].push((c, v));
                    cols[c].push(r);
                }
            }
        }
        let mut col_count: Vec<usize> = cols.iter().map(|c| c.len()).collect();
        let mut row_done = vec![false; k];
        let mut col_done = vec![false; k];
        let mut mark = vec![NONE; k];
        let mut lu = Self {
            k,
            ..Self::default()
        };
        let mut bad_cols = Vec::new();
        let mut remaining = k;
        while remaining > 0 {
            remaining -= 1;
            // column of minimum count
            let mut pc = NONE;
            let mut best = usize::MAX;
            for c in 0..k {
                if !col_done[c] && col_count[c] < best {
                    best = col_count[c];
                    pc = c;
                    if best <= 1 {
                        break;
                    }
                }
            }
            let entry = |rows: &[Vec<(usize, f64)>], r: usize, c: usize| -> f64 {
                rows[r].iter().find(|e| e.0 == c).map_or(0.0, |e| e.1)
            };
            let mut colmax = 0.0f64;
            for &r in &cols[pc] {
                if !row_done[r] {
                    colmax = colmax.max(entry(&rows, r, pc).abs());
                }
            }
            col_done[pc] = true;
            if colmax <= SINGULAR_TOL {
                bad_cols.push(pc);
                for &r in &cols[pc] {
                    if !row_done[r] {
                        rows[r].retain(|e| e.0 != pc);
                    }
                }
                continue;
            }
            let mut pr = NONE;
            let mut pr_len = usize::MAX;
            let mut pr_val = 0.0f64;
            for &r in &cols[pc] {
                if row_done[r] {
                    continue;
                }
                let v = entry(&rows, r, pc);
                if v.abs() >= THRESHOLD * colmax && (rows[r].len() < pr_len || (rows[r].len() == pr_len && v.abs() > pr_val.abs())) {
                    pr = r;
                    pr_len = rows[r].len();
                    pr_val = v;
                }
            }
            row_done[pr] = true;
            let prow_entries: Vec<(usize, f64)> = rows[pr].iter().copied().filter(|e| e.0 != pc).collect();
            for &(c, _) in &prow_entries {
                col_count[c] -= 1;
            }
            let mut lcol = Vec::new();
            let targets: Vec<usize> = cols[pc].iter().copied().filter(|&r| !row_done[r]).collect();
            for r in targets {
                let pos = rows[r].iter().position(|e| e.0 == pc).unwrap();
                let m = rows[r][pos].1 / pr_val;
                rows[r].swap_remove(pos);
                if m == 0.0 {
                    continue;
                }
                lcol.push((r, m));
                for (i, e) in rows[r].iter().enumerate() {
                    mark[e.0] = i;
                }
                for &(c, v) in &prow_entries {
                    let i = mark[c];
                    if i != NONE {
                        rows[r][i].1 -= m * v;
                    } else {
                        rows[r].push((c, -m * v));
                        cols[c].push(r);
                        col_count[c] += 1;
                    }
                }
                for e in &rows[r] {
                    mark[e.0] = NONE;
                }
            }
            lu.prow.push(pr);
            lu.pcol.push(pc);
            lu.piv.push(pr_val);
            lu.l.push(lcol);
            lu.u.push(prow_entries);
        }
        if !bad_cols.is_empty() {
            let free_rows = (0..k).filter(|&r| !row_done[r]).collect();
            return Err((bad_cols, free_rows));
        }
        Ok(lu)
    }

    /// Solves `A u = b` (`b` indexed by row, consumed); result indexed by column.
    fn solve(&self, b: &mut [f64]) -> Vec<f64> {
        for (t, lcol) in self.l.iter().enumerate() {
            let bt = b[self.prow[t]];
            if bt != 0.0 {
                for &(r, m) in lcol {
                    b[r] -= m * bt;
                }
            }
        }
        let mut u = vec![0.0; self.k];
        for t in (0..self.prow.len()).rev() {
            let mut s = b[self.prow[t]];
            for &(c, v) in &self.u[t] {
                s -= v * u[c];
            }
            u[self.pcol[t]] = s / self.piv[t];
        }
        u
    }

    /// Solves `Aᵀ v = d` (`d` indexed by column); result indexed by row.
    fn solve_transpose(&self, d: &[f64]) -> Vec<f64> {
        let mut d = d.to_vec();
        let mut v = vec![0.0; self.k];
        for t in 0..self.prow.len() {
            let s = d[self.pcol[t]] / self.piv[t];
            v[self.prow[t]] = s;
            if s != 0.0 {
                for &(c, a) in &self.u[t] {
                    d[c] -= a * s;
                }
            }
        }
        for t in (0..self.prow.len()).rev() {
            let mut s = v[self.prow[t]];
            for &(r, m) in &self.l[t] {
                s -= m * v[r];
            }
            v[self.prow[t]] = s;
        }
        v
    }
}

#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    col: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Default)]
struct Factor {
    /// Kernel rows (rows whose slack is nonbasic).
    rows: Vec<usize>,
    row_k: Vec<usize>,
    /// Basis positions of the kernel structural columns.
    pos: Vec<usize>,
    vars: Vec<usize>,
    /// Kernel index of each structural variable, `NONE` if not in the kernel.
    col_k: Vec<usize>,
    /// `(position, row)` of each basic slack.
    slack: Vec<(usize, usize)>,
    lu: SparseLu,
}

/// Simplex engine over a [`LinearProgram`] that supports bound changes,
/// row additions and basis snapshots between solves.
#[derive(Debug, Clone)]
pub struct LpEngine {
    n: usize,
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    status: Vec<VarStatus>,
    head: Vec<usize>,
    x: Vec<f64>,
    factor: Factor,
    etas: Vec<Eta>,
    fresh: bool,
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub max_iter: usize,
    iterations: usize,
}

fn slack_bounds(sense: RowSense) -> (f64, f64) {
    match sense {
        RowSense::Le => (0.0, f64::INFINITY),
        RowSense::Ge => (f64::NEG_INFINITY, 0.0),
        RowSense::Eq => (0.0, 0.0),
    }
}

fn nonbasic_status(lo: f64, hi: f64) -> VarStatus {
    if lo.is_finite() {
        VarStatus::Lower
    } else if hi.is_finite() {
        VarStatus::Upper
    } else {
        VarStatus::Free
    }
}

impl LpEngine {
    pub fn new(lp: &LinearProgram) -> Self {
        let n = lp.n_vars();
        let mut e = Self {
            n,
            m: 0,
            cols: vec![Vec::new(); n],
            rows: Vec::new(),
            rhs: Vec::new(),
            lo: lp.lower.clone(),
            hi: lp.upper.clone(),
            cost: lp.cost.clone(),
            status: Vec::with_capacity(n),
            head: Vec::new(),
            x: vec![0.0; n],
            factor: Factor::default(),
            etas: Vec::new(),
            fresh: false,
            feas_tol: 1e-9,
            opt_tol: 1e-9,
            max_iter: 1_000_000,
            iterations: 0,
        };
        for j in 0..n {
            let s = nonbasic_status(e.lo[j], e.hi[j]);
            e.status.push(s);
            e.x[j] = e.bound_value(j, s);
        }
        for r in &lp.rows {
            e.push_row(r);
        }
        e
    }

    fn bound_value(&self, j: usize, s: VarStatus) -> f64 {
        match s {
            VarStatus::Lower => self.lo[j],
            VarStatus::Upper => self.hi[j],
            _ => 0.0,
        }
    }

    fn push_row(&mut self, row: &LpRow) {
        let r = self.m;
        for &(j, a) in &row.coeffs {
            self.cols[j].push((r, a));
        }
        self.rows.push(row.coeffs.clone());
        self.rhs.push(row.rhs);
        let (lo, hi) = slack_bounds(row.sense);
        // slack basis extension: variable n + r sits at position r
        let idx = self.n + r;
        debug_assert_eq!(self.lo.len(), idx);
        self.lo.push(lo);
        self.hi.push(hi);
        self.status.push(VarStatus::Basic);
        self.x.push(0.0);
        self.head.push(idx);
        self.m += 1;
        self.fresh = false;
    }

    /// Adds an already scaled row with a basic slack.
    pub fn add_row(&mut self, row: &LpRow) {
        // slack indices must stay contiguous after the structurals
        self.push_row(row);
    }

    pub fn n_rows(&self) -> usize {
        self.m
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn lower(&self, j: usize) -> f64 {
        self.lo[j]
    }

    pub fn upper(&self, j: usize) -> f64 {
        self.hi[j]
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lo[j] = lo;
        self.hi[j] = hi;
        if self.status[j] != VarStatus::Basic {
            let s = match self.status[j] {
                VarStatus::Upper if hi.is_finite() => VarStatus::Upper,
                _ => nonbasic_status(lo, hi),
            };
            self.status[j] = s;
            self.x[j] = self.bound_value(j, s);
        }
    }

    pub fn set_cost(&mut self, j: usize, c: f64) {
        self.cost[j] = c;
    }

    pub fn values(&self) -> Vec<f64> {
        self.x[..self.n].to_vec()
    }

    pub fn objective(&self) -> f64 {
        (0..self.n).map(|j| self.cost[j] * self.x[j]).sum()
    }

    pub fn basis(&self) -> Basis {
        Basis {
            n: self.n,
            status: self.status.clone(),
        }
    }

    /// Restores a snapshot. Rows added after the snapshot get basic slacks.
    /// Snapshots from a different model shape are ignored.
    pub fn set_basis(&mut self, b: &Basis) {
        if b.n != self.n || b.status.len() > self.n + self.m {
            return;
        }
        let mut status = b.status.clone();
        status.resize(self.n + self.m, VarStatus::Basic);
        let n_basic = status.iter().filter(|&&s| s == VarStatus::Basic).count();
        if n_basic != self.m {
            return;
        }
        self.head.clear();
        for (j, s) in status.iter().enumerate() {
            if *s == VarStatus::Basic {
                self.head.push(j);
            }
        }
        for j in 0..self.n + self.m {
            let s = match status[j] {
                VarStatus::Basic => VarStatus::Basic,
                VarStatus::Upper if self.hi[j].is_finite() => VarStatus::Upper,
                VarStatus::Lower if self.lo[j].is_finite() => VarStatus::Lower,
                _ => nonbasic_status(self.lo[j], self.hi[j]),
            };
            status[j] = s;
        }
        self.status = status;
        for j in 0..self.n + self.m {
            if self.status[j] != VarStatus::Basic {
                self.x[j] = self.bound_value(j, self.status[j]);
            }
        }
        self.fresh = false;
    }

    fn refactor(&mut self) -> bool {
        for _attempt in 0..4 {
            match self.try_factor() {
                Ok(f) => {
                    self.factor = f;
                    self.etas.clear();
                    self.fresh = true;
                    return true;
                }
                Err((bad_vars, free_rows)) => {
                    for (j, r) in bad_vars.into_iter().zip(free_rows) {
                        let p = self.head.iter().position(|&h| h == j).unwrap();
                        let s = nonbasic_status(self.lo[j], self.hi[j]);
                        let s = if s == VarStatus::Lower
                            && self.hi[j].is_finite()
                            && (self.x[j] - self.hi[j]).abs() < (self.x[j] - self.lo[j]).abs()
                        {
                            VarStatus::Upper
                        } else {
                            s
                        };
                        self.status[j] = s;
                        self.x[j] = self.bound_value(j, s);
                        let slack = self.n + r;
                        self.status[slack] = VarStatus::Basic;
                        self.head[p] = slack;
                    }
                }
            }
        }
        false
    }

    fn try_factor(&self) -> Result<Factor, (Vec<usize>, Vec<usize>)> {
        let mut f = Factor {
            row_k: vec![NONE; self.m],
            col_k: vec![NONE; self.n],
            ..Factor::default()
        };
        let mut slack_basic = vec![false; self.m];
        for (p, &j) in self.head.iter().enumerate() {
            if j >= self.n {
                f.slack.push((p, j - self.n));
                slack_basic[j - self.n] = true;
            } else {
                f.col_k[j] = f.pos.len();
                f.pos.push(p);
                f.vars.push(j);
            }
        }
        for r in 0..self.m {
            if !slack_basic[r] {
                f.row_k[r] = f.rows.len();
                f.rows.push(r);
            }
        }
        let k = f.pos.len();
        debug_assert_eq!(k, f.rows.len());
        let columns: Vec<Vec<(usize, f64)>> = f
            .vars
            .iter()
            .map(|&j| {
                self.cols[j]
                    .iter()
                    .filter(|&&(r, _)| f.row_k[r] != NONE)
                    .map(|&(r, v)| (f.row_k[r], v))
                    .collect()
            })
            .collect();
        match SparseLu::factor(&columns, k) {
            Ok(lu) => {
                f.lu = lu;
                Ok(f)
            }
            Err((cols, rows)) => {
                let vars = cols.iter().map(|&c| self.head[f.pos[c]]).collect();
                let rows = rows.iter().map(|&i| f.rows[i]).collect();
                Err((vars, rows))
            }
        }
    }

    /// `B⁻¹ a` for a row-indexed dense `a`; result indexed by basis position.
    fn ftran(&self, a: &[f64]) -> Vec<f64> {
        let f = &self.factor;
        let mut ak: Vec<f64> = f.rows.iter().map(|&r| a[r]).collect();
        let u = f.lu.solve(&mut ak);
        let mut w = vec![0.0; self.m];
        for (c, &p) in f.pos.iter().enumerate() {
            w[p] = u[c];
        }
        for &(p, r) in &f.slack {
            let mut v = a[r];
            for &(j, coef) in &self.rows[r] {
                let c = f.col_k[j];
                if c != NONE {
                    v -= coef * u[c];
                }
            }
            w[p] = v;
        }
        for e in &self.etas {
            let vp = w[e.pos] / e.pivot;
            w[e.pos] = vp;
            if vp != 0.0 {
                for &(i, wi) in &e.col {
                    w[i] -= wi * vp;
                }
            }
        }
        w
    }

    /// `B⁻ᵀ c` for a position-indexed `c`; result indexed by row.
    fn btran(&self, c: &[f64]) -> Vec<f64> {
        let f = &self.factor;
        let mut v = c.to_vec();
        for e in self.etas.iter().rev() {
            let mut s = v[e.pos];
            for &(i, wi) in &e.col {
                s -= wi * v[i];
            }
            v[e.pos] = s / e.pivot;
        }
        let mut pi = vec![0.0; self.m];
        for &(p, r) in &f.slack {
            pi[r] = v[p];
        }
        let k = f.pos.len();
        let mut d = vec![0.0; k];
        for (c, (&p, &j)) in f.pos.iter().zip(&f.vars).enumerate() {
            let mut s = v[p];
            for &(r, a) in &self.cols[j] {
                if f.row_k[r] == NONE {
                    s -= a * pi[r];
                }
            }
            d[c] = s;
        }
        let pk = f.lu.solve_transpose(&d);
        for (i, &r) in f.rows.iter().enumerate() {
            pi[r] = pk[i];
        }
        pi
    }

    fn column(&self, j: usize) -> Vec<f64> {
        let mut a = vec![0.0; self.m];
        if j < self.n {
            for &(r, v) in &self.cols[j] {
                a[r] = v;
            }
        } else {
            a[j - self.n] = 1.0;
        }
        a
    }

    fn compute_basics(&mut self) {
        let mut res = self.rhs.clone();
        for j in 0..self.n {
            if self.status[j] != VarStatus::Basic && self.x[j] != 0.0 {
                for &(r, a) in &self.cols[j] {
                    res[r] -= a * self.x[j];
                }
            }
        }
        for r in 0..self.m {
            let j = self.n + r;
            if self.status[j] != VarStatus::Basic {
                res[r] -= self.x[j];
            }
        }
        let w = self.ftran(&res);
        for (p, &j) in self.head.iter().enumerate() {
            self.x[j] = w[p];
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lo[j] - self.feas_tol {
            -1.0
        } else if v > self.hi[j] + self.feas_tol {
            1.0
        } else {
            0.0
        }
    }

    pub fn solve(&mut self) -> EngineStatus {
        let status = self.solve_inner();
        if status == EngineStatus::Optimal || status == EngineStatus::Infeasible {
            // confirm from a fresh factorization
            if !self.fresh {
                if !self.refactor() {
                    return EngineStatus::NumericalFailure;
                }
                self.compute_basics();
                return self.solve_inner();
            }
        }
        status
    }

    fn solve_inner(&mut self) -> EngineStatus {
        if !self.fresh && !self.refactor() {
            return EngineStatus::NumericalFailure;
        }
        self.compute_basics();
        let mut degenerate = 0usize;
        let mut weights = vec![0.0; self.m];
        loop {
            if self.iterations >= self.max_iter {
                return EngineStatus::IterationLimit;
            }
            if self.etas.len() >= REFACTOR_EVERY {
                if !self.refactor() {
                    return EngineStatus::NumericalFailure;
                }
                self.compute_basics();
            }
            let mut phase1 = false;
            for (p, &j) in self.head.iter().enumerate() {
                let s = self.infeasibility(j);
                weights[p] = s;
                if s != 0.0 {
                    phase1 = true;
                }
            }
            if !phase1 {
                for (p, &j) in self.head.iter().enumerate() {
                    weights[p] = if j < self.n { self.cost[j] } else { 0.0 };
                }
            }
            let pi = self.btran(&weights);
            let bland = degenerate > BLAND_AFTER;
            let Some((q, dir)) = self.price(&pi, phase1, bland) else {
                return if phase1 {
                    EngineStatus::Infeasible
                } else {
                    EngineStatus::Optimal
                };
            };
            let w = self.ftran(&self.column(q));
            let step = self.ratio_test(&w, q, dir, phase1, bland);
            let Some((t, leave)) = step else {
                if phase1 {
                    // cannot happen with a bounded phase-one objective; treat as numerical trouble
                    return EngineStatus::NumericalFailure;
                }
                return EngineStatus::Unbounded;
            };
            self.iterations += 1;
            if t <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.x[q] += dir * t;
            if t != 0.0 {
                for (p, &j) in self.head.iter().enumerate() {
                    if w[p] != 0.0 {
                        self.x[j] -= dir * t * w[p];
                    }
                }
            }
            match leave {
                None => {
                    self.status[q] = if dir > 0.0 {
                        VarStatus::Upper
                    } else {
                        VarStatus::Lower
                    };
                    self.x[q] = self.bound_value(q, self.status[q]);
                }
                Some((p, to_upper)) => {
                    let l = self.head[p];
                    let s = if to_upper {
                        VarStatus::Upper
                    } else {
                        VarStatus::Lower
                    };
                    self.status[l] = s;
                    self.x[l] = self.bound_value(l, s);
                    self.status[q] = VarStatus::Basic;
                    self.head[p] = q;
                    let col = w
                        .iter()
                        .enumerate()
                        .filter(|&(i, &v)| i != p && v.abs() > DROP_TOL)
                        .map(|(i, &v)| (i, v))
                        .collect();
                    self.etas.push(Eta {
                        pos: p,
                        pivot: w[p],
                        col,
                    });
                    self.fresh = false;
                }
            }
        }
    }

    /// Entering variable and direction (+1 increase, -1 decrease).
    fn price(&self, pi: &[f64], phase1: bool, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.n + self.m {
            let st = self.status[j];
            if st == VarStatus::Basic || self.lo[j] == self.hi[j] {
                continue;
            }
            let c = if phase1 || j >= self.n { 0.0 } else { self.cost[j] };
            let d = if j < self.n {
                c - self.cols[j].iter().map(|&(r, a)| pi[r] * a).sum::<f64>()
            } else {
                c - pi[j - self.n]
            };
            let dir = match st {
                VarStatus::Lower if d < -self.opt_tol => 1.0,
                VarStatus::Upper if d > self.opt_tol => -1.0,
                VarStatus::Free if d.abs() > self.opt_tol => -d.signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            let score = d.abs();
            if score > best_score {
                best_score = score;
                best = Some((j, dir));
            }
        }
        best
    }

    /// Step length and leaving position (with the bound it leaves at).
    /// `Some((t, None))` is a bound flip of the entering variable.
    #[allow(clippy::type_complexity)]
    fn ratio_test(
        &self,
        w: &[f64],
        q: usize,
        dir: f64,
        phase1: bool,
        bland: bool,
    ) -> Option<(f64, Option<(usize, bool)>)> {
        let harris = if bland { 0.0 } else { 0.5 * self.feas_tol };
        let range = self.hi[q] - self.lo[q];
        // (position, target bound, at upper) limits
        let target = |p: usize| -> Option<(f64, bool, f64)> {
            let wp = w[p];
            if wp.abs() <= PIVOT_TOL {
                return None;
            }
            let j = self.head[p];
            let rate = -dir * wp;
            let v = self.x[j];
            let (lo, hi) = (self.lo[j], self.hi[j]);
            if rate > 0.0 {
                let b = if phase1 && v < lo - self.feas_tol {
                    lo
                } else if phase1 && v > hi + self.feas_tol {
                    return None;
                } else {
                    hi
                };
                if !b.is_finite() {
                    return None;
                }
                Some((b, b == hi && !(phase1 && v < lo - self.feas_tol), rate))
            } else {
                let b = if phase1 && v > hi + self.feas_tol {
                    hi
                } else if phase1 && v < lo - self.feas_tol {
                    return None;
                } else {
                    lo
                };
                if !b.is_finite() {
                    return None;
                }
                Some((b, phase1 && v > hi + self.feas_tol, rate))
            }
        };
        let mut t_max = f64::INFINITY;
        for p in 0..self.m {
            if let Some((b, _, rate)) = target(p) {
                let v = self.x[self.head[p]];
                let lim = if rate > 0.0 {
                    (b + harris - v) / rate
                } else {
                    (v - (b - harris)) / -rate
                };
                t_max = t_max.min(lim.max(0.0));
            }
        }
        let mut chosen: Option<(usize, bool, f64)> = None;
        let mut chosen_key = (0.0f64, usize::MAX);
        if t_max.is_finite() {
            for p in 0..self.m {
                if let Some((b, up, rate)) = target(p) {
                    let v = self.x[self.head[p]];
                    let t = ((b - v) / rate).max(0.0);
                    if t <= t_max {
                        let better = if bland {
                            let idx = self.head[p];
                            match chosen {
                                None => true,
                                Some((_, _, ct)) => {
                                    t < ct - 1e-12 || (t <= ct + 1e-12 && idx < chosen_key.1)
                                }
                            }
                        } else {
                            w[p].abs() > chosen_key.0
                        };
                        if better {
                            chosen = Some((p, up, t));
                            chosen_key = (w[p].abs(), self.head[p]);
                        }
                    }
                }
            }
        }
        if range.is_finite() && (chosen.is_none() || range <= chosen.map_or(f64::INFINITY, |c| c.2)) {
            return Some((range, None));
        }
        chosen.map(|(p, up, t)| (t, Some((p, up))))
    }
}
