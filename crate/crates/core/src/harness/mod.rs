//! Experiments, figures, the acceptance suite and the command line.

pub mod certify;
pub mod cli;
pub mod experiment;
pub mod plot;
