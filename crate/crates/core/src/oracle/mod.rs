//! Brute-force and residual checks for the solvers.
//!
//! The grid searches evaluate allocations directly from the battery and
//! rate models, without the solvers' pricing or stationarity machinery.

mod check;
mod grid;

pub use check::{feasibility_check, kkt_residuals_lsc, kkt_residuals_ltm, FeasibilityReport};
pub use grid::{grid_search_single_frame, grid_search_two_frame, GridSpec, OracleResult};
