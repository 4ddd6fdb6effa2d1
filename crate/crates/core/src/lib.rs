//! Transmission schedules for an energy-harvesting transmitter that sends
//! layered codes over a quasi-static fading channel it cannot observe.
//!
//! Two layering strategies are supported: time-multiplexed layers
//! ([`ltm`]) and superposition-coded layers ([`lsc`]). Each comes with
//! single-frame, two-frame and multi-frame offline solvers; [`online`]
//! holds the causal policies and [`oracle`] the brute-force checks.

pub mod alloc;
pub mod error;
pub mod frame;
pub mod lsc;
pub mod ltm;
pub mod model;
pub mod multiframe;
pub mod online;
pub mod oracle;
pub mod roots;
pub mod system;

use std::fmt;
use std::str::FromStr;

pub use alloc::{FrameAlloc, LscAllocation, LscFrame, LtmAllocation, LtmFrame};
pub use error::{Error, Result};
pub use model::{BatteryParams, ChannelDist, FrameConfig, HarvestProfile};
pub use system::System;

/// Layering strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Layered time-multiplexing.
    Ltm,
    /// Layered superposition coding.
    Lsc,
}

impl Strategy {
    pub const ALL: [Strategy; 2] = [Strategy::Ltm, Strategy::Lsc];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ltm => "ltm",
            Self::Lsc => "lsc",
        }
    }

    /// Single-frame optimum spending the battery.
    pub fn solve_frame(self, sys: &System, b0: f64, u: f64) -> Result<FrameAlloc> {
        Ok(match self {
            Self::Ltm => FrameAlloc::Ltm(ltm::solve_ltm_frame(sys, b0, u)?),
            Self::Lsc => FrameAlloc::Lsc(lsc::solve_lsc_frame(sys, b0, u)?),
        })
    }

    /// Best frame moving the battery from `b` to at least `b_end`.
    pub fn plan_frame(self, sys: &System, u: f64, b: f64, b_end: f64) -> Option<FrameAlloc> {
        match self {
            Self::Ltm => ltm::plan_ltm_frame(sys, u, b, b_end).map(FrameAlloc::Ltm),
            Self::Lsc => lsc::plan_lsc_frame(sys, u, b, b_end).map(FrameAlloc::Lsc),
        }
    }

    /// Two-frame offline optimum from `sys.battery.b_0`.
    pub fn solve_two_frame(self, sys: &System, profile: &HarvestProfile) -> Result<Vec<FrameAlloc>> {
        Ok(match self {
            Self::Ltm => ltm::solve_ltm_two_frame(sys, profile)?
                .frames
                .into_iter()
                .map(FrameAlloc::Ltm)
                .collect(),
            Self::Lsc => lsc::solve_lsc_two_frame(sys, profile)?
                .frames
                .into_iter()
                .map(FrameAlloc::Lsc)
                .collect(),
        })
    }

    /// Multi-frame offline optimum for an unbounded battery.
    pub fn solve_multiframe(self, sys: &System, profile: &HarvestProfile) -> Result<Vec<FrameAlloc>> {
        Ok(match self {
            Self::Ltm => ltm::solve_ltm_multiframe_convex(sys, profile)?
                .frames
                .into_iter()
                .map(FrameAlloc::Ltm)
                .collect(),
            Self::Lsc => lsc::solve_lsc_multiframe_convex(sys, profile)?
                .frames
                .into_iter()
                .map(FrameAlloc::Lsc)
                .collect(),
        })
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ltm" => Ok(Self::Ltm),
            "lsc" => Ok(Self::Lsc),
            other => Err(error::invalid("strategy", format!("expected `ltm` or `lsc`, got `{other}`"))),
        }
    }
}
