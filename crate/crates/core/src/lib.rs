//! Piecewise-convex relaxations for separable mixed-integer nonlinear programs.
//!
//! A nonconvex univariate function is split at its inflection points into
//! convex and concave pieces ([`univariate`]). The problem is then rewritten
//! as a mixed-integer model in one of three disjunctive formulations
//! ([`formulation`]) whose convex pieces are strengthened by perspective
//! cuts ([`cuts`]) inside an LP-based branch-and-cut ([`solver`]).

pub mod cuts;
pub mod formulation;
pub mod harness;
pub mod oracles;
pub mod problems;
pub mod solver;
pub mod univariate;
