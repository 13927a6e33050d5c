//! LP engine, cutting-plane relaxation, branch-and-cut and the external
//! solver bridge.

pub mod bnc;
pub mod external;
pub mod lp;
pub mod lpfile;
pub mod relax;
pub mod simplex;

pub use bnc::{branch_and_cut, gap_percent, PrimalHook, SolveReport, SolveStatus};
pub use external::{external_milp_adapter, AdapterError, ExternalSolverConfig};
pub use lp::{solve_lp, LinearProgram, LpRow, LpSolution, LpStatus};
pub use relax::{
    solve_root_relaxation, solve_root_relaxation_with, Branching, NodeOrder, Relaxation, RootRelaxation, SolveConfig,
};
pub use simplex::{Basis, EngineStatus, LpEngine, VarStatus};
