use std::f64::consts::PI;

use pwconvex::cuts::make_cut;
use pwconvex::formulation::{build, Formulation, Model, PerspectiveTerm, Strengthening};
use pwconvex::oracles::profile_model;
use pwconvex::problems::{gen_nck, trig_function, ufl_type_params, Family, NckFamily, SplitMix64};
use pwconvex::solver::{solve_root_relaxation, SolveConfig};
use pwconvex::univariate::{decompose, UnivariateFunction};

fn families() -> Vec<(&'static str, UnivariateFunction, f64, f64)> {
    let mut v = vec![
        ("sin", UnivariateFunction::sine(1.0, 1.0, 0.0), 0.0, 2.0 * PI),
        ("neg-sin", UnivariateFunction::sine(-1.0, 1.0, 0.0), 0.0, 2.0 * PI),
        ("trig", trig_function(), 0.0, 100.0),
        ("logistic", gen_nck(1, NckFamily::Logistic, 12).unwrap().function(0), 0.0, 100.0),
    ];
    for (ty, name) in [(1, "ufl-1"), (2, "ufl-2"), (3, "ufl-3")] {
        let (a, b, c) = ufl_type_params(ty).unwrap();
        v.push((name, UnivariateFunction::squared_composite(a, b, c), 0.0, 1.0));
    }
    v
}

fn models(f: &UnivariateFunction, l: f64, u: f64) -> Vec<Model> {
    let d = decompose(f, l, u).unwrap();
    [Formulation::Im, Formulation::Mcm]
        .into_iter()
        .map(|form| profile_model(f, &d, form, Strengthening::Perspective).unwrap())
        .collect()
}

fn terms(f: &UnivariateFunction, l: f64, u: f64) -> Vec<PerspectiveTerm> {
    models(f, l, u).into_iter().flat_map(|m| m.terms).collect()
}

#[test]
fn validity_sweep() {
    let mut rng = SplitMix64::new(21);
    for (name, f, l, u) in families() {
        let ts = terms(&f, l, u);
        let mut worst = f64::NEG_INFINITY;
        for k in 0..10_000 {
            let t = &ts[k % ts.len()];
            let cut = make_cut(t, 0, rng.uniform(t.q_lo, t.q_hi)).unwrap();
            let y = 1.0 - rng.next_f64();
            let point = rng.uniform(t.q_lo, t.q_hi);
            let x = y * (point - t.anchor);
            let z = y * (f.value(point) - t.offset);
            assert!((t.value(x, y) - z).abs() <= 1e-9 * (1.0 + z.abs()));
            worst = worst.max(cut.rhs(x, y) - z);
        }
        assert!(worst <= 1e-9, "{name}: {worst}");
    }
}

#[test]
fn cuts_hold_at_integer_points() {
    let mut rng = SplitMix64::new(22);
    for (name, f, l, u) in families() {
        let d = decompose(&f, l, u).unwrap();
        for m in models(&f, l, u) {
            let b = &m.blocks[0];
            for _ in 0..1000 {
                let x = rng.uniform(l, u);
                let s = d.segment_of(x).unwrap();
                let mut v = vec![0.0; m.n_vars()];
                for (r, sv) in b.segments.iter().enumerate() {
                    let (lo, hi) = d.segment(r);
                    match m.formulation {
                        Formulation::Im if r < s => (v[sv.y], v[sv.x]) = (1.0, hi - lo),
                        Formulation::Im if r == s => (v[sv.y], v[sv.x]) = (1.0, x - lo),
                        Formulation::Mcm if r == s => (v[sv.y], v[sv.x]) = (1.0, x),
                        _ => {}
                    }
                }
                for (id, t) in m.terms.iter().enumerate() {
                    let z = t.value(v[t.x], v[t.y]);
                    let cut = make_cut(t, id, rng.uniform(t.q_lo, t.q_hi)).unwrap();
                    let viol = cut.rhs(v[t.x], v[t.y]) - z;
                    assert!(viol <= 1e-9, "{name} {:?} x={x}: {viol}", m.formulation);
                }
            }
        }
    }
}

#[test]
fn coefficients_are_finite_on_the_closed_domain() {
    for (name, f, l, u) in families() {
        for t in terms(&f, l, u) {
            for q in [t.q_lo, t.q_hi, 0.5 * (t.q_lo + t.q_hi)] {
                let c = make_cut(&t, 0, q).unwrap();
                assert!(c.coef_x.is_finite() && c.coef_y.is_finite() && c.constant.is_finite(), "{name} q={q}");
            }
        }
    }
}

#[test]
fn more_initial_cuts_save_root_rounds() {
    let p = Family::NckTrig.generate((50, 0), 1).unwrap().to_separable().unwrap();
    let m = build(&p, Formulation::Mcm, Strengthening::Perspective).unwrap();
    let rounds = |k: usize| {
        let cfg = SolveConfig {
            initial_cut_k: k,
            ..SolveConfig::default()
        };
        let r = solve_root_relaxation(&m, &cfg);
        assert!(r.converged);
        (r.rounds, r.bound)
    };
    let (r2, b2) = rounds(2);
    let (r5, b5) = rounds(5);
    assert!(r5 <= r2, "k=5: {r5} rounds, k=2: {r2} rounds");
    assert!((b2 - b5).abs() <= 1e-5 * (1.0 + b2.abs()));
}
