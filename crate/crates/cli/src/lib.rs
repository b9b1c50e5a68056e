//! Experiment harness for the solver: configuration, single runs, ε sweeps
//! for the complexity exponent and mesh sweeps on the discretized functional.

pub mod config;
pub mod error;
pub mod harness;
pub mod record;

pub use config::{EpsilonGrid, ExperimentConfig, StartSpec};
pub use error::{HarnessError, Result};
pub use harness::{
    check_oracle, least_squares, run_epsilon_sweep, run_mesh_sweep, run_single, MeshSummary, RunOutcome, SummaryRow,
    SweepSummary, SLOPE_MARGIN,
};
