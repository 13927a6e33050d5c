//! Perspective cuts: supporting hyperplanes of the epigraph of a
//! [`PerspectiveTerm`], and the separation routine used by the
//! cutting-plane loop.

use std::collections::HashSet;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulation::PerspectiveTerm;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CutError {
    #[error("generation point {q} outside per-unit domain [{lo}, {hi}]")]
    OutOfDomain { q: f64, lo: f64, hi: f64 },
    #[error("need at least two initial cuts, got {0}")]
    TooFewCuts(usize),
}

/// `z >= coef_x * x + coef_y * y + constant`.
///
/// Perspective cuts have `constant == 0`; tangent cuts of the plain form have
/// `coef_y == 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub term: usize,
    pub coef_x: f64,
    pub coef_y: f64,
    pub constant: f64,
    /// Per-unit generation point.
    pub q: f64,
    /// Violation at the point that triggered the cut (0 for initial cuts).
    pub violation: f64,
}

impl Cut {
    pub fn rhs(&self, x: f64, y: f64) -> f64 {
        self.coef_x * x + self.coef_y * y + self.constant
    }
}

/// Cut of term `t` (with index `term_id`) generated at per-unit point `q`.
pub fn make_cut(t: &PerspectiveTerm, term_id: usize, q: f64) -> Result<Cut, CutError> {
    let slack = 1e-12 * (1.0 + t.q_hi.abs().max(t.q_lo.abs()));
    if !(q >= t.q_lo - slack && q <= t.q_hi + slack) {
        return Err(CutError::OutOfDomain {
            q,
            lo: t.q_lo,
            hi: t.q_hi,
        });
    }
    let slope = t.func.derivative(q);
    let intercept = t.func.value(q) - t.offset - slope * (q - t.anchor);
    let (coef_y, constant) = if t.perspective { (intercept, 0.0) } else { (0.0, intercept) };
    Ok(Cut {
        term: term_id,
        coef_x: slope,
        coef_y,
        constant,
        q,
        violation: 0.0,
    })
}

/// Most violated cut at `(x, y, z)`, if its violation exceeds `eps_cut`.
pub fn separate(
    t: &PerspectiveTerm,
    term_id: usize,
    x: f64,
    y: f64,
    z: f64,
    eps_y: f64,
    eps_cut: f64,
) -> Option<Cut> {
    let q = if !t.perspective {
        t.anchor + x
    } else if y > eps_y {
        t.anchor + x / y
    } else if x.abs() <= eps_y {
        return None;
    } else {
        0.5 * (t.q_lo + t.q_hi)
    };
    let q = q.clamp(t.q_lo, t.q_hi);
    let mut cut = make_cut(t, term_id, q).ok()?;
    let violation = cut.rhs(x, y) - z;
    if violation > eps_cut {
        cut.violation = violation;
        Some(cut)
    } else {
        None
    }
}

/// `k` cuts at equally spaced points of the per-unit domain, endpoints included.
pub fn initial_cuts(t: &PerspectiveTerm, term_id: usize, k: usize) -> Result<Vec<Cut>, CutError> {
    if k < 2 {
        return Err(CutError::TooFewCuts(k));
    }
    (0..k)
        .map(|i| {
            let q = if i + 1 == k {
                t.q_hi
            } else {
                t.q_lo + (t.q_hi - t.q_lo) * i as f64 / (k - 1) as f64
            };
            make_cut(t, term_id, q)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub node: usize,
    pub term: usize,
    pub q: f64,
    pub violation: f64,
}

/// Accepted cuts of one solve, deduplicated by `(term, q rounded to 1e-7)`.
#[derive(Debug, Default, Clone)]
pub struct CutPool {
    seen: HashSet<(usize, i64)>,
    pub cuts: Vec<Cut>,
    pub trace: Vec<TraceLine>,
    pub tracing: bool,
}

impl CutPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_trace() -> Self {
        Self {
            tracing: true,
            ..Self::default()
        }
    }

    fn key(cut: &Cut) -> (usize, i64) {
        (cut.term, (cut.q * 1e7).round() as i64)
    }

    /// Adds the cut unless an equivalent one is already present.
    pub fn insert(&mut self, cut: Cut, node: usize) -> bool {
        if !self.seen.insert(Self::key(&cut)) {
            return false;
        }
        if self.tracing {
            self.trace.push(TraceLine {
                node,
                term: cut.term,
                q: cut.q,
                violation: cut.violation,
            });
        }
        self.cuts.push(cut);
        true
    }

    pub fn contains(&self, cut: &Cut) -> bool {
        self.seen.contains(&Self::key(cut))
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    /// One line per accepted cut: `node term q violation`.
    pub fn write_trace<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for t in &self.trace {
            writeln!(w, "{} {} {:.17e} {:.6e}", t.node, t.term, t.q, t.violation)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::univariate::UnivariateFunction;
    use std::f64::consts::PI;

    fn im_term(g: UnivariateFunction, lo: f64, hi: f64) -> PerspectiveTerm {
        let offset = g.value(lo);
        PerspectiveTerm {
            func: g,
            anchor: lo,
            q_lo: lo,
            q_hi: hi,
            x: 0,
            y: 1,
            z: 2,
            offset,
            perspective: true,
            block: 0,
            segment: 0,
        }
    }

    #[test]
    fn im_cut_at_minimum_of_neg_sin() {
        let t = im_term(UnivariateFunction::sine(-1.0, 1.0, 0.0), 0.0, PI);
        let c = make_cut(&t, 0, PI / 2.0).unwrap();
        assert!(c.coef_x.abs() < 1e-15);
        assert!((c.coef_y + 1.0).abs() < 1e-15);
        assert_eq!(c.constant, 0.0);
    }

    #[test]
    fn cut_at_anchor_has_no_y_coefficient() {
        let t = im_term(UnivariateFunction::polynomial(vec![0.0, 1.0, 2.0]), 1.0, 3.0);
        let c = make_cut(&t, 0, 1.0).unwrap();
        assert!(c.coef_y.abs() < 1e-15);
        assert!((c.coef_x - 5.0).abs() < 1e-15);
        assert!(make_cut(&t, 0, 3.5).is_err());
    }

    #[test]
    fn cut_reduces_to_tangent_and_vanishes_at_origin() {
        let g = UnivariateFunction::squared_composite(25.0, 10.0, 5.0);
        let mut t = im_term(g.clone(), 0.4, 0.6);
        t.anchor = 0.0;
        t.offset = g.value(0.0);
        let q = 0.5;
        let c = make_cut(&t, 0, q).unwrap();
        assert!(c.rhs(0.0, 0.0).abs() < 1e-15);
        for &p in &[0.4, 0.45, 0.55, 0.6] {
            let tangent = g.value(q) + g.derivative(q) * (p - q) - g.value(0.0);
            assert!((c.rhs(p, 1.0) - tangent).abs() < 1e-10);
        }
    }

    #[test]
    fn separation_examples() {
        let t = im_term(UnivariateFunction::sine(-1.0, 1.0, 0.0), 0.0, PI);
        let c = separate(&t, 0, 1.0, 1.0, -1e6, 1e-6, 1e-6).unwrap();
        assert!((c.q - 1.0).abs() < 1e-15);
        assert!((c.coef_x + 1.0f64.cos()).abs() < 1e-15);
        assert!(separate(&t, 0, 0.0, 0.0, 0.0, 1e-6, 1e-6).is_none());
        // y ~ 0 with a positive load uses the domain midpoint
        let c = separate(&t, 0, 0.5, 0.0, -10.0, 1e-6, 1e-6).unwrap();
        assert!((c.q - PI / 2.0).abs() < 1e-15);
        // satisfied point
        assert!(separate(&t, 0, 1.0, 1.0, 10.0, 1e-6, 1e-6).is_none());
    }

    #[test]
    fn initial_cut_points() {
        let t = im_term(UnivariateFunction::polynomial(vec![0.0, 0.0, 1.0]), -1.0, 1.0);
        let cs = initial_cuts(&t, 0, 2).unwrap();
        assert_eq!(cs.iter().map(|c| c.q).collect::<Vec<_>>(), vec![-1.0, 1.0]);
        let cs = initial_cuts(&t, 0, 3).unwrap();
        assert_eq!(cs[1].q, 0.0);
        assert!(initial_cuts(&t, 0, 1).is_err());
    }

    #[test]
    fn pool_deduplicates() {
        let t = im_term(UnivariateFunction::polynomial(vec![0.0, 0.0, 1.0]), 0.0, 1.0);
        let mut pool = CutPool::with_trace();
        assert!(pool.insert(make_cut(&t, 3, 0.5).unwrap(), 0));
        assert!(!pool.insert(make_cut(&t, 3, 0.5 + 1e-9).unwrap(), 1));
        assert!(pool.insert(make_cut(&t, 4, 0.5).unwrap(), 1));
        let mut out = Vec::new();
        pool.write_trace(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 2);
    }

    #[test]
    fn supremum_of_cuts_recovers_perspective() {
        let g = UnivariateFunction::logistic(0.15, 50.0, 80.0, -50.0);
        let t = im_term(g, 0.0, 76.0);
        let cuts = initial_cuts(&t, 0, 200).unwrap();
        for i in 1..=20 {
            let y = i as f64 / 20.0;
            for c in cuts.iter().step_by(7) {
                let x = y * (c.q - t.anchor);
                let sup = cuts.iter().map(|c| c.rhs(x, y)).fold(f64::NEG_INFINITY, f64::max);
                let exact = t.value(x, y);
                assert!(sup <= exact + 1e-9);
                assert!(exact - sup < 1e-6, "gap {} at ({x},{y})", exact - sup);
            }
        }
    }
}
