use std::f64::consts::PI;

use pwconvex::formulation::{build, build_im, build_mcm, Formulation, SeparableProblem, Strengthening};
use pwconvex::oracles::{brute_force_minlp, BruteForceOptions};
use pwconvex::problems::{primal_hook, Family, Instance};
use pwconvex::solver::{branch_and_cut, solve_root_relaxation, SolveConfig, SolveStatus};
use pwconvex::univariate::UnivariateFunction;

fn neg_sin() -> SeparableProblem {
    SeparableProblem::epigraph(UnivariateFunction::sine(-1.0, 1.0, 0.0), 0.0, 2.0 * PI)
        .decomposed()
        .unwrap()
}

#[test]
fn neg_sin_root_bounds_reach_the_minimum() {
    let p = neg_sin();
    let cfg = SolveConfig::default();
    for f in [Formulation::Im, Formulation::Mcm, Formulation::Ccm] {
        let m = build(&p, f, Strengthening::Perspective).unwrap();
        let r = solve_root_relaxation(&m, &cfg);
        assert!(r.converged, "{f:?}");
        assert!((r.bound + 1.0).abs() < 1e-6, "{f:?}: {}", r.bound);
    }
}

#[test]
fn cutting_plane_loop_on_a_single_perspective_term() {
    // z >= y * [-sin(x / y)] over [0, pi]: minimum -1 at (pi/2, 1)
    let p = SeparableProblem::epigraph(UnivariateFunction::sine(-1.0, 1.0, 0.0), 0.0, PI)
        .decomposed()
        .unwrap();
    let m = build_im(&p, Strengthening::Perspective).unwrap();
    let r = solve_root_relaxation(&m, &SolveConfig::default());
    assert!((r.bound + 1.0).abs() < 1e-6);
    assert!(r.history.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    assert!((r.assignment.values[0] - PI / 2.0).abs() < 1e-2);
    // frozen iteration count of the default configuration
    assert!(r.rounds <= 30, "rounds {}", r.rounds);
}

#[test]
fn convex_instance_needs_one_node() {
    let g = UnivariateFunction::polynomial(vec![1.0, -2.0, 1.0]);
    let p = SeparableProblem::epigraph(g, -3.0, 3.0).decomposed().unwrap();
    let m = build_mcm(&p, Strengthening::Perspective).unwrap();
    let rep = branch_and_cut(&m, &SolveConfig::default(), None);
    assert_eq!(rep.nodes, 1);
    assert_eq!(rep.status, SolveStatus::Optimal);
    assert!(rep.incumbent.unwrap().abs() < 1e-6);
    assert!((rep.final_bound - rep.incumbent.unwrap()).abs() < 1e-6);
}

#[test]
fn neg_sin_branch_and_cut() {
    let p = neg_sin();
    for f in [Formulation::Im, Formulation::Mcm, Formulation::Ccm] {
        let m = build(&p, f, Strengthening::Perspective).unwrap();
        let rep = branch_and_cut(&m, &SolveConfig::default(), None);
        assert_eq!(rep.status, SolveStatus::Optimal);
        let inc = rep.incumbent.unwrap();
        assert!((inc + 1.0).abs() < 1e-5, "{f:?} {inc}");
        assert!(rep.final_bound <= inc + 1e-9);
    }
}

fn tiny(family: Family, seed: u64) -> (Instance, SeparableProblem) {
    let size = if family.is_nck() { (3, 0) } else { (2, 3) };
    let inst = family.generate(size, seed).unwrap();
    let p = inst.to_separable().unwrap();
    (inst, p)
}

#[test]
fn reports_are_deterministic() {
    for (family, seed) in [(Family::NckTrig, 3), (Family::Ufl2, 4)] {
        let (inst, p) = tiny(family, seed);
        let hook = primal_hook(&inst, &p);
        let m = build(&p, Formulation::Im, Strengthening::Perspective).unwrap();
        let a = branch_and_cut(&m, &SolveConfig::default(), Some(&hook));
        let b = branch_and_cut(&m, &SolveConfig::default(), Some(&hook));
        assert_eq!(a.without_timings(), b.without_timings());
    }
}

#[test]
fn gap_is_zero_exactly_when_optimal() {
    for seed in 0..6 {
        let (inst, p) = tiny(Family::ALL[seed as usize % 5], 20 + seed);
        let hook = primal_hook(&inst, &p);
        let m = build(&p, Formulation::Mcm, Strengthening::Perspective).unwrap();
        let cfg = SolveConfig::default();
        let rep = branch_and_cut(&m, &cfg, Some(&hook));
        assert_eq!(rep.status, SolveStatus::Optimal);
        assert!(rep.gap_percent.unwrap() <= 100.0 * cfg.mip_gap + 1e-9);
        let limited = SolveConfig {
            node_limit: 1,
            ..cfg.clone()
        };
        let early = branch_and_cut(&m, &limited, Some(&hook));
        if early.status != SolveStatus::Optimal {
            assert!(early.gap_percent.map_or(true, |g| g > 100.0 * cfg.mip_gap));
        }
    }
}

#[test]
fn root_bound_is_monotone_across_rounds() {
    for seed in 0..10 {
        let (_, p) = tiny(Family::ALL[seed as usize % 5], 30 + seed);
        for f in [Formulation::Im, Formulation::Mcm, Formulation::Ccm] {
            let m = build(&p, f, Strengthening::Perspective).unwrap();
            let r = solve_root_relaxation(&m, &SolveConfig::default());
            let scale = 1e-9 * (1.0 + r.bound.abs());
            assert!(r.history.windows(2).all(|w| w[1] >= w[0] - scale), "{f:?} {:?}", r.history);
        }
    }
}

#[test]
fn tiny_trig_knapsack_matches_brute_force() {
    let (inst, p) = tiny(Family::NckTrig, 9);
    let truth = brute_force_minlp(&p, &BruteForceOptions::default()).unwrap().objective.unwrap();
    let hook = primal_hook(&inst, &p);
    for f in [Formulation::Im, Formulation::Mcm, Formulation::Ccm] {
        let m = build(&p, f, Strengthening::Perspective).unwrap();
        let rep = branch_and_cut(&m, &SolveConfig::default(), Some(&hook));
        let inc = rep.incumbent.unwrap();
        assert!((inc - truth).abs() <= 1e-3 * truth.abs(), "{f:?}: {inc} vs {truth}");
    }
}

#[test]
fn formulations_agree_on_the_optimum() {
    for seed in 0..10 {
        let (inst, p) = tiny(Family::ALL[seed as usize % 5], 50 + seed);
        let hook = primal_hook(&inst, &p);
        let inc: Vec<f64> = [Formulation::Im, Formulation::Mcm, Formulation::Ccm]
            .into_iter()
            .map(|f| {
                let m = build(&p, f, Strengthening::Perspective).unwrap();
                let rep = branch_and_cut(&m, &SolveConfig::default(), Some(&hook));
                assert_eq!(rep.status, SolveStatus::Optimal);
                rep.incumbent.unwrap()
            })
            .collect();
        for v in &inc[1..] {
            assert!((v - inc[0]).abs() <= 1e-6 * inc[0].abs().max(1.0), "seed {seed}: {inc:?}");
        }
    }
}

#[test]
fn two_interval_knapsack_bounds_coincide() {
    let cfg = SolveConfig {
        cut_eps: 1e-9,
        max_root_rounds: 5000,
        ..SolveConfig::default()
    };
    for seed in 1..=3 {
        let p = Family::NckLogistic.generate((10, 0), seed).unwrap().to_separable().unwrap();
        let b: Vec<f64> = [Formulation::Im, Formulation::Mcm]
            .into_iter()
            .map(|f| solve_root_relaxation(&build(&p, f, Strengthening::Perspective).unwrap(), &cfg).bound)
            .collect();
        assert!((b[0] - b[1]).abs() <= 1e-6 * b[1].abs(), "{b:?}");
    }
}
