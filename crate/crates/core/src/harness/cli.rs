//! Command line: `gen`, `solve`, `relax`, `compare`, `profile`, `certify`.
//!
//! Exit codes: 0 on success, 1 on a usage error (the offending flag is
//! printed), 2 when a solve fails or a criterion does not pass.

use std::ffi::OsString;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use super::certify::run_all;
use super::experiment::{run_experiment_with, ExperimentSpec};
use super::plot::profile_data;
use crate::formulation::{build, Formulation, Strengthening};
use crate::problems::{gen_nck, primal_hook, trig_function, ufl_type_params, Family, Instance, NckFamily};
use crate::solver::external::solve_lp_file;
use crate::solver::{
    branch_and_cut, external_milp_adapter, solve_root_relaxation, ExternalSolverConfig, LpStatus, SolveConfig,
    SolveReport, SolveStatus,
};
use crate::univariate::{decompose, UnivariateFunction};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "pwconvex", version, about = "Piecewise-convex MINLP relaxations and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a benchmark instance as JSON.
    Gen(GenArgs),
    /// Solve an instance by branch-and-cut.
    Solve(SolveArgs),
    /// Solve the root relaxation of an instance.
    Relax(RelaxArgs),
    /// Run a batch and write a table of root gaps, times and cuts.
    Compare(CompareArgs),
    /// Plot the IM and MCM relaxation profiles of a univariate function.
    Profile(ProfileArgs),
    /// Run the acceptance criteria and print a pass/fail matrix.
    Certify(CertifyArgs),
    /// Solve an LP file with integrality section and write a solution file.
    #[command(hide = true)]
    LpSolve { lp: PathBuf, solution: PathBuf },
}

/// `10` (NCK items) or `3x6` (UFL facilities x customers).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Size(pub usize, pub usize);

impl FromStr for Size {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("invalid size '{s}'"));
        match s.split_once(['x', 'X']) {
            Some((k, t)) => Ok(Size(num(k)?, num(t)?)),
            None => Ok(Size(num(s)?, 0)),
        }
    }
}

/// Seed list: `3`, `1,2,5` or the inclusive range `1..10`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let bad = || format!("invalid seed list '{s}'");
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

fn parse_sizes(s: &str) -> Result<Vec<Size>, String> {
    s.split(',').map(Size::from_str).collect()
}

fn parse_formulations(s: &str) -> Result<Vec<Formulation>, String> {
    s.split(',').map(|t| t.trim().parse::<Formulation>().map_err(|e| e.to_string())).collect()
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    family: Family,
    #[arg(long)]
    size: Size,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InstanceArgs {
    /// Instance file written by `gen`.
    #[arg(long, conflicts_with_all = ["family", "size"])]
    instance: Option<PathBuf>,
    #[arg(long, requires = "size")]
    family: Option<Family>,
    #[arg(long, requires = "family")]
    size: Option<Size>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long, default_value = "mcm")]
    formulation: Formulation,
    /// Plain convex terms instead of perspective ones.
    #[arg(long)]
    no_pr: bool,
    #[arg(long, allow_hyphen_values = true)]
    time_limit: Option<f64>,
}

impl ModelArgs {
    fn strengthening(&self) -> Result<Strengthening, Usage> {
        match (self.no_pr, self.formulation) {
            (false, _) => Ok(Strengthening::Perspective),
            (true, Formulation::Im) => Ok(Strengthening::Plain),
            (true, f) => Err(Usage::new(
                "--no-pr",
                format!("the plain convex term is only available with --formulation im, not {}", f.label()),
            )),
        }
    }

    fn config(&self) -> Result<SolveConfig, Usage> {
        let mut cfg = SolveConfig::default();
        if let Some(t) = self.time_limit {
            if !(t > 0.0) {
                return Err(Usage::new("--time-limit", format!("must be positive, got {t}")));
            }
            cfg.time_limit_seconds = t;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// External MILP solver reading LP files (see README).
    #[arg(long)]
    solver: Option<PathBuf>,
    #[arg(long = "solver-arg", allow_hyphen_values = true)]
    solver_args: Vec<String>,
    /// Report file (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RelaxArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long)]
    family: Family,
    /// Comma separated, e.g. `10,20,50` or `3x6,6x12`.
    #[arg(long, value_parser = parse_sizes)]
    sizes: std::vec::Vec<Size>,
    #[arg(long, value_parser = parse_seeds, default_value = "1..10")]
    seeds: std::vec::Vec<u64>,
    #[arg(long, value_parser = parse_formulations, default_value = "im,mcm")]
    formulations: std::vec::Vec<Formulation>,
    #[arg(long)]
    no_pr: bool,
    /// Per-instance branch-and-cut limit in seconds.
    #[arg(long, allow_hyphen_values = true)]
    time_limit: Option<f64>,
    /// Root relaxations only.
    #[arg(long)]
    relax_only: bool,
    /// Table file (CSV; stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-instance file (CSV).
    #[arg(long)]
    instances_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ProfileArgs {
    /// neg-sin, sin, trig, logistic, ufl-1, ufl-2 or ufl-3.
    #[arg(long = "fn")]
    function: String,
    /// Parameter draw for `logistic`.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// SVG file.
    #[arg(long)]
    out: PathBuf,
    /// Also write the series as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    /// Criteria to run (all when omitted), e.g. `1,2,12`.
    #[arg(long, value_delimiter = ',')]
    only: Vec<usize>,
    /// Matrix file (text) in addition to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
struct Usage {
    flag: &'static str,
    msg: String,
}

impl Usage {
    fn new(flag: &'static str, msg: impl Into<String>) -> Self {
        Self { flag, msg: msg.into() }
    }
}

enum Failure {
    Usage(Usage),
    Solve(String),
}

impl From<Usage> for Failure {
    fn from(u: Usage) -> Self {
        Failure::Usage(u)
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Solve(format!("{}: {e}", path.display()))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| io_failure(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
        Command::Relax(a) => relax(a),
        Command::Compare(a) => compare(a),
        Command::Profile(a) => profile(a),
        Command::Certify(a) => certify(a),
        Command::LpSolve { lp, solution } => lp_solve(&lp, &solution),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(u)) => {
            eprintln!("error: invalid value for '{}': {}", u.flag, u.msg);
            EXIT_USAGE
        }
        Err(Failure::Solve(msg)) => {
            eprintln!("error: {msg}");
            EXIT_FAILURE
        }
    }
}

fn generate(family: Family, size: Size, seed: u64) -> Result<Instance, Usage> {
    if family.is_nck() && size.1 != 0 {
        return Err(Usage::new("--size", format!("{} takes a single item count", family.label())));
    }
    if !family.is_nck() && size.1 == 0 {
        return Err(Usage::new("--size", format!("{} takes KxT", family.label())));
    }
    family
        .generate((size.0, size.1), seed)
        .map_err(|e| Usage::new("--size", e.to_string()))
}

fn gen(a: GenArgs) -> Result<(), Failure> {
    let inst = generate(a.family, a.size, a.seed)?;
    let json = serde_json::to_string_pretty(&inst).map_err(|e| Failure::Solve(e.to_string()))?;
    write_output(a.out.as_deref(), &(json + "\n"))
}

fn load_instance(a: &InstanceArgs) -> Result<Instance, Failure> {
    match (&a.instance, a.family, a.size) {
        (Some(p), _, _) => Instance::load(p).map_err(|e| io_failure(p, e)),
        (None, Some(f), Some(s)) => Ok(generate(f, s, a.seed)?),
        _ => Err(Usage::new("--instance", "give an instance file or --family with --size").into()),
    }
}

fn report_line(r: &SolveReport) -> String {
    let inc = r.incumbent.map_or("-".into(), |v| format!("{v:.6}"));
    let gap = r.gap_percent.map_or("-".into(), |v| format!("{v:.4}%"));
    format!(
        "{} status={} incumbent={inc} bound={:.6} gap={gap} root_bound={:.6} cuts={} nodes={} time={:.2}s",
        r.formulation,
        r.status.label(),
        r.final_bound,
        r.root_bound,
        r.total_cuts,
        r.nodes,
        r.total_time
    )
}

fn solve(a: SolveArgs) -> Result<(), Failure> {
    let inst = load_instance(&a.instance)?;
    let cfg = a.model.config()?;
    let p = inst.to_separable().map_err(|e| Failure::Solve(e.to_string()))?;
    let m = build(&p, a.model.formulation, a.model.strengthening()?).map_err(|e| Failure::Solve(e.to_string()))?;
    let report = match &a.solver {
        Some(exe) => {
            let args: Vec<&str> = a.solver_args.iter().map(String::as_str).collect();
            let ext = ExternalSolverConfig::new(exe, &args);
            external_milp_adapter(&m, &[], &ext, &cfg).map_err(|e| Failure::Solve(e.to_string()))?
        }
        None => {
            let hook = primal_hook(&inst, &p);
            branch_and_cut(&m, &cfg, Some(&hook))
        }
    };
    println!("{}", report_line(&report));
    if let Some(out) = &a.out {
        let json = serde_json::to_string_pretty(&report).map_err(|e| Failure::Solve(e.to_string()))?;
        std::fs::write(out, json + "\n").map_err(|e| io_failure(out, e))?;
    }
    match report.status {
        SolveStatus::Infeasible | SolveStatus::NumericalFailure => {
            Err(Failure::Solve(format!("solve ended {}", report.status.label())))
        }
        _ if report.incumbent.is_none() => Err(Failure::Solve("no feasible solution found".into())),
        _ => Ok(()),
    }
}

fn relax(a: RelaxArgs) -> Result<(), Failure> {
    let inst = load_instance(&a.instance)?;
    let cfg = a.model.config()?;
    let p = inst.to_separable().map_err(|e| Failure::Solve(e.to_string()))?;
    let m = build(&p, a.model.formulation, a.model.strengthening()?).map_err(|e| Failure::Solve(e.to_string()))?;
    let r = solve_root_relaxation(&m, &cfg);
    if r.status != LpStatus::Optimal {
        return Err(Failure::Solve(format!("root relaxation ended {:?}", r.status)));
    }
    println!(
        "{} bound={:.9} cuts={} rounds={} converged={}",
        a.model.formulation.label(),
        r.bound,
        r.cuts_used,
        r.rounds,
        r.converged
    );
    if let Some(out) = &a.out {
        let json = serde_json::json!({
            "formulation": a.model.formulation,
            "bound": r.bound,
            "cuts": r.cuts_used,
            "rounds": r.rounds,
            "converged": r.converged,
            "values": r.assignment.values,
        });
        let text = serde_json::to_string_pretty(&json).map_err(|e| Failure::Solve(e.to_string()))?;
        std::fs::write(out, text + "\n").map_err(|e| io_failure(out, e))?;
    }
    Ok(())
}

fn compare(a: CompareArgs) -> Result<(), Failure> {
    for s in &a.sizes {
        if a.family.is_nck() != (s.1 == 0) {
            let want = if a.family.is_nck() { "item counts" } else { "KxT pairs" };
            return Err(Usage::new("--sizes", format!("{} takes {want}", a.family.label())).into());
        }
    }
    let mut spec = ExperimentSpec::new(a.family, a.sizes.iter().map(|s| (s.0, s.1)).collect(), a.seeds);
    spec.formulations = a.formulations;
    spec.relax_only = a.relax_only;
    if a.no_pr {
        if spec.formulations.iter().any(|&f| f != Formulation::Im) {
            return Err(Usage::new("--no-pr", "the plain convex term is only available with --formulations im").into());
        }
        spec.strengthening = Strengthening::Plain;
    }
    if let Some(t) = a.time_limit {
        if !(t > 0.0) {
            return Err(Usage::new("--time-limit", format!("must be positive, got {t}")).into());
        }
        spec.config.time_limit_seconds = t;
    }
    let exp = run_experiment_with(&spec, &mut |r| {
        let gaps: Vec<String> = r
            .runs
            .iter()
            .map(|run| {
                let g = r.root_gap(run.formulation).map_or("-".into(), |g| format!("{g:.3}%"));
                format!("{} {g}", run.formulation.label())
            })
            .collect();
        match &r.error {
            Some(e) => eprintln!("{:?} seed {}: error: {e}", r.size, r.seed),
            None => eprintln!("{:?} seed {}: {}", r.size, r.seed, gaps.join(", ")),
        }
    })
    .map_err(|e| Usage::new("--seeds", e))?;
    if let Some(p) = &a.instances_out {
        std::fs::write(p, exp.instances_csv()).map_err(|e| io_failure(p, e))?;
    }
    write_output(a.out.as_deref(), &exp.table_csv())?;
    if let Some(e) = exp.instances.iter().find_map(|r| r.error.as_ref()) {
        return Err(Failure::Solve(e.clone()));
    }
    Ok(())
}

/// Named test function with its domain.
pub fn named_function(name: &str, seed: u64) -> Option<(UnivariateFunction, f64, f64)> {
    Some(match name {
        "neg-sin" => (UnivariateFunction::sine(-1.0, 1.0, 0.0), 0.0, 2.0 * PI),
        "sin" => (UnivariateFunction::sine(1.0, 1.0, 0.0), 0.0, 2.0 * PI),
        "trig" => (trig_function(), 0.0, 100.0),
        "logistic" => (gen_nck(1, NckFamily::Logistic, seed).ok()?.function(0), 0.0, 100.0),
        "ufl-1" | "ufl-2" | "ufl-3" => {
            let (a, b, c) = ufl_type_params(name.as_bytes()[4] - b'0')?;
            (UnivariateFunction::squared_composite(a, b, c), 0.0, 1.0)
        }
        _ => return None,
    })
}

fn profile(a: ProfileArgs) -> Result<(), Failure> {
    let (f, l, u) = named_function(&a.function, a.seed).ok_or_else(|| {
        Usage::new(
            "--fn",
            format!("unknown function '{}' (expected neg-sin, sin, trig, logistic, ufl-1, ufl-2, ufl-3)", a.function),
        )
    })?;
    let d = decompose(&f, l, u).map_err(|e| Failure::Solve(e.to_string()))?;
    let series = profile_data(&f, &d, Strengthening::Perspective).map_err(|e| Failure::Solve(e.to_string()))?;
    std::fs::write(&a.out, series.svg(&a.function)).map_err(|e| io_failure(&a.out, e))?;
    if let Some(p) = &a.csv {
        std::fs::write(p, series.csv()).map_err(|e| io_failure(p, e))?;
    }
    let gap = series
        .mcm
        .iter()
        .zip(&series.im)
        .map(|(m, i)| m - i)
        .fold(0.0, f64::max);
    println!("{}: {} segments, max(MCM - IM) = {gap:.6}", a.function, d.segment_count());
    Ok(())
}

fn certify(a: CertifyArgs) -> Result<(), Failure> {
    if let Some(&bad) = a.only.iter().find(|&&id| !(1..=12).contains(&id)) {
        return Err(Usage::new("--only", format!("no criterion {bad} (expected 1 to 12)")).into());
    }
    let mut text = String::new();
    let results = run_all(&a.only, &mut |r| {
        println!("{r}");
        text.push_str(&format!("{r}\n"));
    });
    let failed = results.iter().filter(|r| !r.passed).count();
    let summary = format!("{} passed, {failed} failed", results.len() - failed);
    println!("{summary}");
    if let Some(p) = &a.out {
        std::fs::write(p, text + &summary + "\n").map_err(|e| io_failure(p, e))?;
    }
    if failed > 0 {
        return Err(Failure::Solve(format!("{failed} criteria failed")));
    }
    Ok(())
}

fn lp_solve(lp: &Path, solution: &Path) -> Result<(), Failure> {
    let status = solve_lp_file(lp, solution, &SolveConfig::default()).map_err(|e| Failure::Solve(e.to_string()))?;
    println!("{}", status.label());
    Ok(())
}
