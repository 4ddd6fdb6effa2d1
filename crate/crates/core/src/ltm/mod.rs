//! Layered time-multiplexing: layers occupy disjoint partitions of a frame.

mod multi;
mod plan;
mod single;

pub use multi::{solve_ltm_multiframe_convex, solve_ltm_two_frame};
pub use plan::plan_ltm_frame;
pub use single::{
    exhaustion_derivative, ideal_exhaustion_equation, ideal_pair_equation, ideal_pair_roots, pair_tie_prices,
    pair_tie_residual, solve_ltm_single, solve_ltm_single_ideal,
};
pub(crate) use single::solve_ltm_frame;
