use std::f64::consts::PI;

use proptest::prelude::*;
use pwconvex::formulation::{build, Formulation, RowSense, Strengthening};
use pwconvex::harness::certify::neg_sin_exact_gap;
use pwconvex::oracles::{
    brute_force_minlp, envelope, grid, profile_config, profile_model, profile_point, tangency, BruteForceOptions,
    DEFAULT_SAMPLES,
};
use pwconvex::problems::{primal_hook, Family};
use pwconvex::solver::{branch_and_cut, SolveConfig, SolveStatus};
use pwconvex::univariate::{decompose, UnivariateFunction};

// tangency point of -sin seen from (2pi, 0), and of sin seen from the origin
const NEG_SIN_TANGENCY: f64 = 1.7897758492705222;
const SIN_TANGENCY: f64 = 4.493409457909064;
const NEG_SIN_GAP: f64 = 0.41349793509467636;

#[test]
fn tangency_points() {
    let neg = UnivariateFunction::sine(-1.0, 1.0, 0.0);
    let t = tangency(&neg, 2.0 * PI, 0.0, PI / 2.0, PI, 1e-13).unwrap();
    assert!((t - NEG_SIN_TANGENCY).abs() < 1e-10);
    let sin = UnivariateFunction::sine(1.0, 1.0, 0.0);
    let s = tangency(&sin, 0.0, 0.0, PI, 1.5 * PI, 1e-13).unwrap();
    assert!((s - SIN_TANGENCY).abs() < 1e-10);
    assert!((neg_sin_exact_gap() - NEG_SIN_GAP).abs() < 1e-9);
}

#[test]
fn neg_sin_envelope() {
    let f = UnivariateFunction::sine(-1.0, 1.0, 0.0);
    let d = decompose(&f, 0.0, 2.0 * PI).unwrap();
    let env = envelope(&f, &d, DEFAULT_SAMPLES).unwrap();
    let t = NEG_SIN_TANGENCY;
    let slope = t.sin() / (2.0 * PI - t);
    for x in grid(0.0, 2.0 * PI, 301) {
        let hull = if x <= t { -x.sin() } else { -t.sin() + slope * (x - t) };
        assert!((env.eval(x) - hull).abs() < 2e-6, "x = {x}");
    }
}

#[test]
fn sin_envelope() {
    let f = UnivariateFunction::sine(1.0, 1.0, 0.0);
    let d = decompose(&f, 0.0, 2.0 * PI).unwrap();
    let env = envelope(&f, &d, DEFAULT_SAMPLES).unwrap();
    let s = SIN_TANGENCY;
    assert!((env.eval(PI / 2.0) - s.cos() * PI / 2.0).abs() < 1e-5);
    for x in grid(s, 2.0 * PI, 50) {
        assert!((env.eval(x) - x.sin()).abs() < 1e-5);
    }
}

#[test]
fn neg_sin_profiles() {
    let f = UnivariateFunction::sine(-1.0, 1.0, 0.0);
    let d = decompose(&f, 0.0, 2.0 * PI).unwrap();
    let im = profile_model(&f, &d, Formulation::Im, Strengthening::Perspective).unwrap();
    let cfg = profile_config();
    for x in grid(0.0, 2.0 * PI, 41) {
        let expected = if x <= PI / 2.0 {
            -x.sin()
        } else if x <= PI {
            -1.0
        } else {
            -(x / 2.0).sin()
        };
        let v = profile_point(&im, x, &cfg).unwrap();
        assert!((v - expected).abs() < 1e-6, "x = {x}: {v} vs {expected}");
    }
    let mcm = profile_model(&f, &d, Formulation::Mcm, Strengthening::Perspective).unwrap();
    let x_star = 2.0 * (2.0 * NEG_SIN_TANGENCY.cos()).acos();
    let gap = profile_point(&mcm, x_star, &cfg).unwrap() - profile_point(&im, x_star, &cfg).unwrap();
    assert!((gap - NEG_SIN_GAP).abs() < 1e-6);
}

#[test]
fn one_item_knapsack_is_a_grid_minimum() {
    let mut p = Family::NckTrig.generate((1, 0), 1).unwrap().to_separable().unwrap();
    p.constraints[0].rhs = 1e9;
    let bf = brute_force_minlp(&p, &BruteForceOptions::default()).unwrap();
    let t = &p.constraints[1].terms[0];
    let d = t.decomposition.as_ref().unwrap();
    let best = grid(0.0, 100.0, 100_001)
        .into_iter()
        .map(|x| d.relaxed_eval(&t.func, x).unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!((bf.objective.unwrap() - best).abs() <= 1e-6 * best.abs());
}

#[test]
fn two_item_knapsack_agrees_with_branch_and_cut() {
    for seed in [3, 8] {
        let inst = Family::NckTrig.generate((2, 0), seed).unwrap();
        let mut p = inst.to_separable().unwrap();
        // binding capacity
        p.constraints[0].rhs = 60.0;
        let bf = brute_force_minlp(&p, &BruteForceOptions::default()).unwrap();
        let m = build(&p, Formulation::Mcm, Strengthening::Perspective).unwrap();
        let rep = branch_and_cut(&m, &SolveConfig::default(), None);
        assert_eq!(rep.status, SolveStatus::Optimal);
        let (a, b) = (bf.objective.unwrap(), rep.incumbent.unwrap());
        assert!((a - b).abs() <= 1e-3 * a.abs(), "seed {seed}: {a} vs {b}");
        let hook_inst = primal_hook(&inst, &p);
        let with_hook = branch_and_cut(&m, &SolveConfig::default(), Some(&hook_inst));
        assert!((with_hook.incumbent.unwrap() - b).abs() <= 1e-6 * b.abs());
    }
}

#[test]
fn negative_capacity_is_infeasible() {
    let mut p = Family::NckLogistic.generate((2, 0), 1).unwrap().to_separable().unwrap();
    assert_eq!(p.constraints[0].sense, RowSense::Le);
    p.constraints[0].rhs = -1.0;
    let bf = brute_force_minlp(&p, &BruteForceOptions::default()).unwrap();
    assert!(bf.objective.is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn envelope_is_below_the_relaxation(a in 0.5f64..2.0, b in 0.3f64..2.0, c in 0.0f64..6.3) {
        let f = UnivariateFunction::sine(a, b, c);
        let Ok(d) = decompose(&f, 0.0, 8.0) else { return Ok(()) };
        let env = envelope(&f, &d, 512).unwrap();
        for x in grid(0.0, 8.0, 512) {
            prop_assert!(env.eval(x) <= d.relaxed_eval(&f, x).unwrap() + 1e-12);
        }
        for w in env.vertices.windows(3) {
            prop_assert!(w[0].0 < w[1].0);
            let s0 = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            let s1 = (w[2].1 - w[1].1) / (w[2].0 - w[1].0);
            prop_assert!(s1 >= s0 - 1e-9);
        }
        for &(x, y) in &env.vertices {
            prop_assert!((y - d.relaxed_eval(&f, x).unwrap()).abs() <= 1e-12);
        }
    }
}
