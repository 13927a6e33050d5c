use std::path::Path;
use std::process::{Command, Output};

use pwconvex::formulation::{build, Formulation, Strengthening};
use pwconvex::problems::{Family, Instance};
use pwconvex::solver::{
    branch_and_cut, external_milp_adapter, solve_lp, AdapterError, ExternalSolverConfig, LinearProgram, SolveConfig,
    SolveStatus,
};

const BIN: &str = env!("CARGO_BIN_EXE_pwconvex");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn adapter() -> ExternalSolverConfig {
    ExternalSolverConfig::new(BIN, &["lp-solve", "{lp}", "{sol}"])
}

#[test]
fn gen_then_solve_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("inst.json");
    let o = run(&["gen", "--family", "ufl-2", "--size", "2x3", "--seed", "5", "--out", file.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let inst = Instance::load(&file).unwrap();
    assert_eq!(inst, Family::Ufl2.generate((2, 3), 5).unwrap());
    let report = dir.path().join("report.json");
    let o = run(&["solve", "--instance", file.to_str().unwrap(), "--formulation", "im", "--out", report.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.contains("\"status\": \"optimal\""));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("IM status=optimal"));
}

#[test]
fn usage_errors_name_the_flag() {
    for (args, flag) in [
        (vec!["solve", "--family", "nck-trig", "--size", "3", "--formulation", "lp"], "--formulation"),
        (vec!["solve", "--family", "nck-trig", "--size", "3", "--time-limit", "0"], "--time-limit"),
        (vec!["solve", "--family", "nck-trig", "--size", "3x4"], "--size"),
        (vec!["relax", "--family", "ufl-1", "--size", "2x2", "--formulation", "mcm", "--no-pr"], "--no-pr"),
        (vec!["compare", "--family", "ufl-1", "--sizes", "10"], "--sizes"),
        (vec!["compare", "--family", "nck-trig", "--sizes", "10", "--seeds", "5..1"], "--seeds"),
        (vec!["profile", "--fn", "cosh", "--out", "x.svg"], "--fn"),
        (vec!["gen", "--family", "nck-trig", "--size", "3", "--seed", "x"], "--seed"),
        (vec!["solve", "--frobnicate"], "--frobnicate"),
        (vec!["certify", "--only", "13"], "--only"),
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(stderr(&o).contains(flag), "{args:?}: {}", stderr(&o));
    }
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn solve_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let o = run(&["solve", "--instance", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["solve", "--family", "nck-trig", "--size", "2", "--solver", "/nonexistent/solver"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not found"));
}

#[test]
fn relax_and_compare_output() {
    let o = run(&["relax", "--family", "nck-logistic", "--size", "4", "--seed", "2", "--formulation", "ccm"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("CCM bound="));
    let o = run(&["compare", "--family", "nck-trig", "--sizes", "3,4", "--seeds", "1..2", "--time-limit", "20"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = String::from_utf8_lossy(&o.stdout).into_owned();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("family,size,instances,IM_time,IM_cuts,IM_opt,IM_gap,IM_relax_gap"));
    assert!(lines[1].starts_with("nck-trig,3,2,"));
}

#[test]
fn profile_figures_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let render = |name: &str| {
        let out = dir.path().join(name);
        let o = run(&["profile", "--fn", "neg-sin", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(out).unwrap()
    };
    let (a, b) = (render("a.svg"), render("b.svg"));
    assert_eq!(a, b);
    assert!(a.starts_with(b"<svg"));
    let csv = dir.path().join("sin.csv");
    let o = run(&["profile", "--fn", "sin", "--out", dir.path().join("s.svg").to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("max(MCM - IM) = 0.000000"));
    assert_eq!(std::fs::read_to_string(csv).unwrap().lines().count(), 102);
}

#[test]
fn certify_subset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("matrix.txt");
    let o = run(&["certify", "--only", "2,12", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]")).count(), 2);
    assert!(text.ends_with("2 passed, 0 failed\n"));
}

#[test]
fn adapter_solves_a_plain_lp() {
    let mut lp = LinearProgram::new();
    let x = lp.add_var(-1.0, 0.0, 10.0);
    let y = lp.add_var(-1.0, 0.0, 10.0);
    lp.add_row(&[(x, 1.0), (y, 1.0)], pwconvex::formulation::RowSense::Le, 1.0);
    let direct = solve_lp(&lp);
    assert!((direct.objective + 1.0).abs() < 1e-9);
    let dir = tempfile::tempdir().unwrap();
    let lp_path = dir.path().join("m.lp");
    let sol_path = dir.path().join("m.sol");
    std::fs::write(&lp_path, pwconvex::solver::lpfile::write_lp(&lp, &[false, false], false)).unwrap();
    let o = run(&["lp-solve", lp_path.to_str().unwrap(), sol_path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sol = pwconvex::solver::lpfile::read_solution(&std::fs::read_to_string(&sol_path).unwrap(), 2).unwrap();
    assert!((sol.values[0] + sol.values[1] - 1.0).abs() < 1e-9);
}

#[test]
fn adapter_matches_branch_and_cut() {
    for seed in 0..10u64 {
        let family = Family::ALL[seed as usize % 5];
        let size = if family.is_nck() { (2, 0) } else { (2, 2) };
        let p = family.generate(size, 90 + seed).unwrap().to_separable().unwrap();
        let m = build(&p, Formulation::Mcm, Strengthening::Perspective).unwrap();
        let cfg = SolveConfig::default();
        let own = branch_and_cut(&m, &cfg, None);
        let ext = external_milp_adapter(&m, &[], &adapter(), &cfg).unwrap();
        assert_eq!(ext.status, SolveStatus::Optimal);
        let (a, b) = (own.incumbent.unwrap(), ext.incumbent.unwrap());
        assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "seed {seed}: {a} vs {b}");
    }
}

#[test]
fn missing_solver_is_a_configuration_error() {
    let p = Family::NckTrig.generate((2, 0), 1).unwrap().to_separable().unwrap();
    let m = build(&p, Formulation::Im, Strengthening::Perspective).unwrap();
    let cfg = ExternalSolverConfig::new(Path::new("/nonexistent/solver"), &[]);
    let err = external_milp_adapter(&m, &[], &cfg, &SolveConfig::default()).unwrap_err();
    assert!(matches!(err, AdapterError::Config(_)));
}
