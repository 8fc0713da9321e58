//! Implicit backward-Euler stepping of the FV and MAC schemes.

mod assembly;
mod config;
mod linear;
mod newton;
mod run;

pub use assembly::{fv_residual, mac_residual, mac_stabilization};
pub use config::{LinearSolverKind, SchemeConfig, SolverOptions, Sources};
pub use linear::LinearStats;
pub use newton::{NewtonStats, Stepper};
pub use run::{constant_data, initial_state, run, run_observed, time_grid, InitialData, RunReport, StepReport, Trajectory};
