//! Random LPs checked against a dense two-phase tableau with Bland's rule.

use pwconvex::formulation::RowSense;
use pwconvex::solver::{solve_lp, LinearProgram, LpEngine, LpStatus};

struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> u64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.0 >> 33
    }
    fn int(&mut self, lo: i64, hi: i64) -> i64 {
        lo + (self.next() % (hi - lo + 1) as u64) as i64
    }
}

#[derive(Debug, PartialEq)]
enum Oracle {
    Optimal(f64),
    Infeasible,
    Unbounded,
}

/// Textbook tableau over `x' = x - lo >= 0`, upper bounds as explicit rows.
fn tableau(lp: &LinearProgram) -> Oracle {
    let n = lp.n_vars();
    let mut rows: Vec<(Vec<f64>, RowSense, f64)> = Vec::new();
    for r in &lp.rows {
        let mut a = vec![0.0; n];
        let mut b = r.rhs;
        for &(j, v) in &r.coeffs {
            a[j] += v;
            b -= v * lp.lower[j];
        }
        rows.push((a, r.sense, b));
    }
    for j in 0..n {
        if lp.upper[j].is_finite() {
            let mut a = vec![0.0; n];
            a[j] = 1.0;
            rows.push((a, RowSense::Le, lp.upper[j] - lp.lower[j]));
        }
    }
    let m = rows.len();
    for row in rows.iter_mut() {
        if row.2 < 0.0 {
            row.0.iter_mut().for_each(|v| *v = -*v);
            row.2 = -row.2;
            row.1 = match row.1 {
                RowSense::Le => RowSense::Ge,
                RowSense::Ge => RowSense::Le,
                RowSense::Eq => RowSense::Eq,
            };
        }
    }
    // columns: n structurals, m slacks, m artificials
    let width = n + 2 * m;
    let mut t = vec![vec![0.0; width + 1]; m];
    let mut basis = vec![0usize; m];
    for (i, (a, sense, b)) in rows.iter().enumerate() {
        t[i][..n].copy_from_slice(a);
        match sense {
            RowSense::Le => {
                t[i][n + i] = 1.0;
                basis[i] = n + i;
            }
            RowSense::Ge => {
                t[i][n + i] = -1.0;
                t[i][n + m + i] = 1.0;
                basis[i] = n + m + i;
            }
            RowSense::Eq => {
                t[i][n + m + i] = 1.0;
                basis[i] = n + m + i;
            }
        }
        t[i][width] = *b;
    }
    let is_art = |j: usize| j >= n + m;

    let pivot = |t: &mut Vec<Vec<f64>>, basis: &mut Vec<usize>, r: usize, c: usize| {
        let p = t[r][c];
        for v in t[r].iter_mut() {
            *v /= p;
        }
        let pr = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != r && row[c] != 0.0 {
                let f = row[c];
                for (v, q) in row.iter_mut().zip(&pr) {
                    *v -= f * q;
                }
            }
        }
        basis[r] = c;
    };

    let run = |t: &mut Vec<Vec<f64>>, basis: &mut Vec<usize>, cost: &[f64], allowed: &dyn Fn(usize) -> bool| -> bool {
        loop {
            let mut enter = None;
            for j in 0..width {
                if !allowed(j) || basis.contains(&j) {
                    continue;
                }
                let d = cost[j] - (0..t.len()).map(|i| cost[basis[i]] * t[i][j]).sum::<f64>();
                if d < -1e-9 {
                    enter = Some(j);
                    break;
                }
            }
            let Some(c) = enter else { return true };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..t.len() {
                if t[i][c] > 1e-9 {
                    let ratio = t[i][width] / t[i][c];
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && basis[i] < basis[li]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else { return false };
            pivot(t, basis, r, c);
        }
    };

    let mut c1 = vec![0.0; width];
    for j in n + m..width {
        c1[j] = 1.0;
    }
    run(&mut t, &mut basis, &c1, &|_| true);
    let infeas: f64 = (0..m).filter(|&i| is_art(basis[i])).map(|i| t[i][width]).sum();
    if infeas > 1e-7 {
        return Oracle::Infeasible;
    }
    let mut keep = vec![true; m];
    for i in 0..m {
        if is_art(basis[i]) {
            match (0..n + m).find(|&j| t[i][j].abs() > 1e-9) {
                Some(c) => pivot(&mut t, &mut basis, i, c),
                None => keep[i] = false,
            }
        }
    }
    let mut t2 = Vec::new();
    let mut b2 = Vec::new();
    for i in 0..m {
        if keep[i] {
            t2.push(t[i].clone());
            b2.push(basis[i]);
        }
    }
    let mut c2 = vec![0.0; width];
    c2[..n].copy_from_slice(&lp.cost);
    if !run(&mut t2, &mut b2, &c2, &|j| !is_art(j)) {
        return Oracle::Unbounded;
    }
    let mut obj: f64 = (0..n).map(|j| lp.cost[j] * lp.lower[j]).sum();
    for (i, &j) in b2.iter().enumerate() {
        obj += c2[j] * t2[i][width];
    }
    Oracle::Optimal(obj)
}

fn random_lp(rng: &mut Lcg) -> LinearProgram {
    let n = rng.int(1, 10) as usize;
    let m = rng.int(1, 10) as usize;
    let mut lp = LinearProgram::new();
    for _ in 0..n {
        let lo = rng.int(-5, 2) as f64;
        let hi = if rng.int(0, 4) == 0 {
            f64::INFINITY
        } else {
            lo + rng.int(0, 8) as f64
        };
        lp.add_var(rng.int(-6, 6) as f64, lo, hi);
    }
    for _ in 0..m {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.int(0, 2) > 0 {
                coeffs.push((j, rng.int(-5, 5) as f64));
            }
        }
        let sense = match rng.int(0, 5) {
            0 => RowSense::Eq,
            1 | 2 => RowSense::Ge,
            _ => RowSense::Le,
        };
        lp.add_row(&coeffs, sense, rng.int(-10, 20) as f64);
    }
    lp
}

fn check(lp: &LinearProgram, status: LpStatus, obj: f64, x: &[f64], what: &str) {
    match tableau(lp) {
        Oracle::Optimal(v) => {
            assert_eq!(status, LpStatus::Optimal, "{what}: oracle optimal {v}, {lp:?}");
            assert!((obj - v).abs() <= 1e-6 * (1.0 + v.abs()), "{what}: {obj} vs {v}");
            assert!(lp.max_violation(x) < 1e-6, "{what}: violation {}", lp.max_violation(x));
        }
        Oracle::Infeasible => assert_eq!(status, LpStatus::Infeasible, "{what}: {lp:?}"),
        Oracle::Unbounded => assert_eq!(status, LpStatus::Unbounded, "{what}: {lp:?}"),
    }
}

#[test]
fn cold_solves_match_tableau() {
    let mut rng = Lcg(7);
    let mut counts = [0usize; 3];
    for _ in 0..500 {
        let lp = random_lp(&mut rng);
        let s = solve_lp(&lp);
        counts[match s.status {
            LpStatus::Optimal => 0,
            LpStatus::Infeasible => 1,
            _ => 2,
        }] += 1;
        check(&lp, s.status, s.objective, &s.x, "cold");
    }
    assert!(counts.iter().all(|&c| c > 10), "{counts:?}");
}

#[test]
fn warm_resolves_after_rows_and_bounds() {
    let mut rng = Lcg(99);
    for _ in 0..300 {
        let mut lp = random_lp(&mut rng);
        let mut engine = LpEngine::new(&lp);
        engine.solve();
        let basis = engine.basis();
        for _ in 0..rng.int(1, 3) {
            let n = lp.n_vars();
            let coeffs: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.int(-3, 3) as f64)).collect();
            let rhs = rng.int(-5, 15) as f64;
            lp.add_row(&coeffs, RowSense::Le, rhs);
            engine.add_row(&lp.rows.last().unwrap().clone());
        }
        let j = rng.int(0, lp.n_vars() as i64 - 1) as usize;
        let lo = lp.lower[j];
        let hi = lo + rng.int(0, 3) as f64;
        lp.upper[j] = hi;
        engine.set_bounds(j, lo, hi);
        let st = engine.solve();
        check(&lp, st.into(), engine.objective(), &engine.values(), "incremental");

        let mut restored = LpEngine::new(&lp);
        restored.set_basis(&basis);
        let st = restored.solve();
        check(&lp, st.into(), restored.objective(), &restored.values(), "restored");
    }
}

#[test]
fn degenerate_transportation_lp() {
    // highly degenerate assignment problem
    let k = 8;
    let mut lp = LinearProgram::new();
    let mut rng = Lcg(3);
    for _ in 0..k * k {
        lp.add_var(rng.int(1, 9) as f64, 0.0, f64::INFINITY);
    }
    for i in 0..k {
        let row: Vec<_> = (0..k).map(|j| (i * k + j, 1.0)).collect();
        lp.add_row(&row, RowSense::Eq, 1.0);
        let col: Vec<_> = (0..k).map(|j| (j * k + i, 1.0)).collect();
        lp.add_row(&col, RowSense::Eq, 1.0);
    }
    let s = solve_lp(&lp);
    check(&lp, s.status, s.objective, &s.x, "assignment");
}
