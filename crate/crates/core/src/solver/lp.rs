use serde::{Deserialize, Serialize};

use super::simplex::{Basis, LpEngine};
use crate::formulation::RowSense;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

/// `min cost · x  s.t.  rows, lower <= x <= upper`.
///
/// Rows are scaled to unit max-abs coefficient on insertion.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub cost: Vec<f64>,
    pub rows: Vec<LpRow>,
    pub warm_start: Option<Basis>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub basis: Basis,
}

/// Scales a row so its largest coefficient has magnitude one. Empty rows are
/// returned unchanged.
pub fn scale_row(coeffs: &[(usize, f64)], rhs: f64) -> (Vec<(usize, f64)>, f64) {
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
    let mut sorted = coeffs.to_vec();
    sorted.sort_by_key(|&(j, _)| j);
    for (j, a) in sorted {
        match merged.last_mut() {
            Some(last) if last.0 == j => last.1 += a,
            _ => merged.push((j, a)),
        }
    }
    merged.retain(|&(_, a)| a != 0.0);
    let scale = merged.iter().fold(0.0f64, |m, &(_, a)| m.max(a.abs()));
    if scale == 0.0 {
        return (merged, rhs);
    }
    (merged.into_iter().map(|(j, a)| (j, a / scale)).collect(), rhs / scale)
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.cost.len() - 1
    }

    pub fn add_row(&mut self, coeffs: &[(usize, f64)], sense: RowSense, rhs: f64) -> usize {
        let (coeffs, rhs) = scale_row(coeffs, rhs);
        self.rows.push(LpRow { coeffs, sense, rhs });
        self.rows.len() - 1
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest bound or row violation at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.n_vars() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        for r in &self.rows {
            let a: f64 = r.coeffs.iter().map(|&(j, v)| v * x[j]).sum::<f64>() - r.rhs;
            worst = worst.max(match r.sense {
                RowSense::Le => a,
                RowSense::Ge => -a,
                RowSense::Eq => a.abs(),
            });
        }
        worst
    }
}

/// Solves `lp` from its warm-start basis (or the slack basis).
pub fn solve_lp(lp: &LinearProgram) -> LpSolution {
    let mut engine = LpEngine::new(lp);
    if let Some(b) = &lp.warm_start {
        engine.set_basis(b);
    }
    let status = engine.solve();
    LpSolution {
        status: status.into(),
        x: engine.values(),
        objective: engine.objective(),
        iterations: engine.iterations(),
        basis: engine.basis(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_examples() {
        let mut lp = LinearProgram::new();
        lp.add_var(1.0, 0.0, 1.0);
        let s = solve_lp(&lp);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(s.objective.abs() < 1e-12);

        let mut lp = LinearProgram::new();
        let x = lp.add_var(-1.0, 0.0, f64::INFINITY);
        let y = lp.add_var(-1.0, 0.0, f64::INFINITY);
        lp.add_row(&[(x, 1.0), (y, 1.0)], RowSense::Le, 1.0);
        let s = solve_lp(&lp);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, 1.0);
        lp.add_row(&[(x, 1.0)], RowSense::Ge, 2.0);
        assert_eq!(solve_lp(&lp).status, LpStatus::Infeasible);

        let mut lp = LinearProgram::new();
        let x = lp.add_var(-1.0, 0.0, f64::INFINITY);
        let y = lp.add_var(0.0, 0.0, 1.0);
        lp.add_row(&[(x, 1.0), (y, -1.0)], RowSense::Ge, 0.0);
        assert_eq!(solve_lp(&lp).status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_and_free_variables() {
        // min t s.t. t >= x - 3, t >= 3 - x, x = 1  ->  t = 2
        let mut lp = LinearProgram::new();
        let x = lp.add_var(0.0, f64::NEG_INFINITY, f64::INFINITY);
        let t = lp.add_var(1.0, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_row(&[(t, 1.0), (x, -1.0)], RowSense::Ge, -3.0);
        lp.add_row(&[(t, 1.0), (x, 1.0)], RowSense::Ge, 3.0);
        lp.add_row(&[(x, 2.0)], RowSense::Eq, 2.0);
        let s = solve_lp(&lp);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 2.0).abs() < 1e-9);
        assert!((s.x[x] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn scaling_merges_duplicates() {
        let (c, r) = scale_row(&[(1, 2.0), (0, -4.0), (1, 2.0)], 8.0);
        assert_eq!(c, vec![(0, -1.0), (1, 1.0)]);
        assert_eq!(r, 2.0);
    }
}
