//! Bridge to an external MILP solver run as a subprocess.
//!
//! The solver is invoked as `executable args...`, where the argument strings
//! `{lp}` and `{sol}` are replaced by the LP-file and solution-file paths. It
//! must write a solution file in the format of [`super::lpfile::read_solution`].
//! The adapter alternates solver calls and cut separation until no
//! perspective cut is violated, first on the continuous relaxation (root
//! bound) and then on the MILP.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::bnc::{branch_and_cut, gap_percent, SolveReport, SolveStatus};
use super::lp::LpRow;
use super::lpfile::{self, LpFileError, SolutionFile};
use super::relax::{cut_row, SolveConfig};
use crate::cuts::{initial_cuts, separate, Cut, CutPool};
use crate::formulation::{Formulation, Model, ObjectiveSense, Row, Strengthening, VarKind, Variable};

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("solver process: {0}")]
    Process(String),
    #[error(transparent)]
    File(#[from] LpFileError),
    #[error("solver reported the model infeasible")]
    Infeasible,
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalSolverConfig {
    pub executable: PathBuf,
    pub args: Vec<String>,
    /// Directory for exchanged files; a fresh temporary directory if unset.
    pub work_dir: Option<PathBuf>,
    /// Solver calls allowed per phase.
    pub max_iterations: usize,
}

impl ExternalSolverConfig {
    pub fn new(executable: impl Into<PathBuf>, args: &[&str]) -> Self {
        Self {
            executable: executable.into(),
            args: args.iter().map(|s| s.to_string()).collect(),
            work_dir: None,
            max_iterations: 200,
        }
    }
}

fn resolve_executable(exe: &Path) -> Option<PathBuf> {
    if exe.components().count() > 1 {
        return exe.is_file().then(|| exe.to_path_buf());
    }
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .map(|d| d.join(exe))
        .find(|p| p.is_file())
}

static CALLS: AtomicUsize = AtomicUsize::new(0);

fn work_dir(cfg: &ExternalSolverConfig) -> std::io::Result<PathBuf> {
    let dir = match &cfg.work_dir {
        Some(d) => d.clone(),
        None => std::env::temp_dir().join(format!(
            "pwconvex-{}-{}",
            std::process::id(),
            CALLS.fetch_add(1, Ordering::Relaxed)
        )),
    };
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn invoke(
    exe: &Path,
    cfg: &ExternalSolverConfig,
    m: &Model,
    rows: &[LpRow],
    dir: &Path,
    relax: bool,
) -> Result<SolutionFile, AdapterError> {
    let lp_path = dir.join("model.lp");
    let sol_path = dir.join("model.sol");
    let _ = std::fs::remove_file(&sol_path);
    lpfile::write_model(m, rows, &lp_path, relax)?;
    let args: Vec<String> = cfg
        .args
        .iter()
        .map(|a| {
            a.replace("{lp}", &lp_path.to_string_lossy())
                .replace("{sol}", &sol_path.to_string_lossy())
        })
        .collect();
    let out = Command::new(exe)
        .args(&args)
        .output()
        .map_err(|e| AdapterError::Process(format!("{}: {e}", exe.display())))?;
    if !out.status.success() {
        return Err(AdapterError::Process(format!(
            "exit status {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    let text = std::fs::read_to_string(&sol_path)
        .map_err(|e| AdapterError::Process(format!("no solution file: {e}")))?;
    let sol = lpfile::read_solution(&text, m.n_vars())?;
    match sol.status.as_str() {
        "optimal" => Ok(sol),
        "infeasible" => Err(AdapterError::Infeasible),
        s => Err(AdapterError::Process(format!("solver status '{s}'"))),
    }
}

/// Solves `m` through the external solver, seeding the cut pool with `cuts`.
pub fn external_milp_adapter(
    m: &Model,
    cuts: &[Cut],
    cfg: &ExternalSolverConfig,
    solve_cfg: &SolveConfig,
) -> Result<SolveReport, AdapterError> {
    let exe = resolve_executable(&cfg.executable)
        .ok_or_else(|| AdapterError::Config(format!("solver executable '{}' not found", cfg.executable.display())))?;
    let dir = work_dir(cfg)?;
    let start = Instant::now();
    let sign = match m.sense {
        ObjectiveSense::Minimize => 1.0,
        ObjectiveSense::Maximize => -1.0,
    };
    let mut pool = CutPool::new();
    for c in cuts {
        pool.insert(c.clone(), 0);
    }
    if solve_cfg.initial_cut_k >= 2 {
        for (id, t) in m.terms.iter().enumerate() {
            if let Ok(cs) = initial_cuts(t, id, solve_cfg.initial_cut_k) {
                for c in cs {
                    pool.insert(c, 0);
                }
            }
        }
    }
    let phase = |relax: bool, pool: &mut CutPool| -> Result<(SolutionFile, usize), AdapterError> {
        for it in 0..cfg.max_iterations.max(1) {
            let rows: Vec<LpRow> = pool.cuts.iter().map(|c| cut_row(m, c)).collect();
            let sol = invoke(&exe, cfg, m, &rows, &dir, relax)?;
            let mut added = 0;
            for (id, t) in m.terms.iter().enumerate() {
                let v = &sol.values;
                if let Some(c) = separate(t, id, v[t.x], v[t.y], v[t.z], solve_cfg.eps_y, solve_cfg.cut_eps) {
                    if pool.insert(c, it) {
                        added += 1;
                    }
                }
            }
            if added == 0 {
                return Ok((sol, it + 1));
            }
        }
        Err(AdapterError::Process("cut loop did not converge".into()))
    };
    let (root, root_rounds) = phase(true, &mut pool)?;
    let root_time = start.elapsed().as_secs_f64();
    let root_cuts = pool.len();
    let (milp, _) = phase(false, &mut pool)?;
    let incumbent = sign * milp.objective;
    if cfg.work_dir.is_none() {
        let _ = std::fs::remove_dir_all(&dir);
    }
    Ok(SolveReport {
        formulation: m.formulation.label().to_string(),
        root_bound: sign * root.objective,
        root_cuts,
        root_rounds,
        root_converged: true,
        root_time,
        incumbent: Some(incumbent),
        final_bound: incumbent,
        gap_percent: Some(gap_percent(incumbent, incumbent)),
        total_cuts: pool.len(),
        total_time: start.elapsed().as_secs_f64(),
        nodes: 0,
        status: SolveStatus::Optimal,
        incumbent_point: Some(milp.values[..m.n_original].to_vec()),
    })
}

/// Solves an LP file (with its integrality section) using the built-in
/// branch-and-bound and writes a solution file. This is the reference
/// backend for the adapter.
pub fn solve_lp_file(lp_path: &Path, sol_path: &Path, cfg: &SolveConfig) -> Result<SolveStatus, AdapterError> {
    let f = lpfile::read_lp(&std::fs::read_to_string(lp_path)?)?;
    let n = f.lp.n_vars();
    let variables = (0..n)
        .map(|j| Variable {
            name: format!("v{j}"),
            kind: if !f.integer[j] {
                VarKind::Continuous
            } else if f.lp.lower[j] >= 0.0 && f.lp.upper[j] <= 1.0 {
                VarKind::Binary
            } else {
                VarKind::Integer
            },
            lower: f.lp.lower[j],
            upper: f.lp.upper[j],
            fixed: false,
        })
        .collect();
    let rows = f
        .lp
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| Row {
            name: format!("r{i}"),
            coeffs: r.coeffs.clone(),
            sense: r.sense,
            rhs: r.rhs,
        })
        .collect();
    let model = Model {
        formulation: Formulation::Mcm,
        strengthening: Strengthening::Perspective,
        sense: ObjectiveSense::Minimize,
        variables,
        rows,
        objective: f.lp.cost.iter().enumerate().filter(|(_, &c)| c != 0.0).map(|(j, &c)| (j, c)).collect(),
        terms: Vec::new(),
        blocks: Vec::new(),
        n_original: n,
        constraint_rows: Vec::new(),
    };
    let report = branch_and_cut(&model, cfg, None);
    let sol = match (&report.incumbent, &report.incumbent_point) {
        (Some(v), Some(x)) if report.status == SolveStatus::Optimal => SolutionFile {
            status: "optimal".into(),
            objective: if f.maximize { -v } else { *v },
            values: x.clone(),
        },
        _ => SolutionFile {
            status: report.status.label().into(),
            objective: f64::NAN,
            values: vec![0.0; n],
        },
    };
    std::fs::write(sol_path, lpfile::write_solution(&sol))?;
    Ok(report.status)
}
