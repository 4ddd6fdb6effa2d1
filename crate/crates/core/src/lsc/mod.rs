//! Layered superposition coding: all layers share the transmission time and
//! higher layers interfere with lower ones.

mod layers;
mod multi;
mod single;

pub use layers::{
    find_active_layers, layered_water_filling, lsc_rates_from_powers, pmax_thresholds, total_power_from_rates,
    ActiveLayerSet,
};
pub use multi::{
    lsc_ideal_powers, solve_lsc_multiframe_convex, solve_lsc_multiframe_ideal, solve_lsc_two_frame, taut_string,
};
pub use single::{plan_lsc_frame, reference_power_profile, solve_lsc_single, stationarity_residual};
pub(crate) use single::solve_lsc_frame;
