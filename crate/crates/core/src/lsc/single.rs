use crate::alloc::{LscAllocation, LscFrame};
use crate::error::{Error, Result};
use crate::frame::{closed_form_duration, mode_stationarity, optimize_duration, supply_floor, Supply};
use crate::roots::{brent, scan_brackets, SCAN_POINTS};
use crate::system::System;

/// Left side minus right side of the power-free stationarity condition at
/// total radiated power `p`, for harvest `u` and idle accumulation `c`:
/// `R(P)/R'(P) - F_d'(x)(x + c)`, `x` the drain delivering `P + P_C - u`.
pub fn stationarity_residual(sys: &System, u: f64, c: f64, p: f64) -> f64 {
    let sup = sys.supply(u);
    let x = sys.battery.f_inverse((p + sys.p_c() - u).max(0.0));
    let curve = sys.lsc_curve();
    mode_stationarity(curve, &sup, sys.p_c(), c, x) / curve.slope(p)
}

/// Layer powers of the frame that runs on stored energy alone (no harvest,
/// `B_0 = P_C tau`) and balances duration against power.
///
/// Solved by bisection on the total power with the layered water-filling
/// inside.
pub fn reference_power_profile(sys: &System) -> Result<Vec<f64>> {
    let sup = Supply::new(0.0, &sys.battery);
    let floor = supply_floor(&sup, sys.p_c());
    if floor > sup.d_max() {
        return Err(Error::NoFeasibleTransmission);
    }
    let p_hi = if sup.d_max().is_finite() {
        sup.d_max() - sys.p_c()
    } else {
        let mut p = (sys.p_c() + 1e-9) * 2.0;
        while stationarity_residual(sys, 0.0, 0.0, p) < 0.0 {
            p *= 2.0;
            if p > 1e15 {
                return Err(Error::SolverDidNotConverge {
                    iterations: 64,
                    residual: stationarity_residual(sys, 0.0, 0.0, p),
                });
            }
        }
        p
    };
    let f = |p: f64| stationarity_residual(sys, 0.0, 0.0, p);
    let total = if f(0.0) >= 0.0 {
        0.0
    } else if f(p_hi) <= 0.0 {
        p_hi
    } else {
        let br = scan_brackets(f, 0.0, p_hi, SCAN_POINTS, false);
        let &(a, b) = br.first().ok_or(Error::NoRootInBracket {
            lo: 0.0,
            hi: p_hi,
            points: SCAN_POINTS,
        })?;
        brent(f, a, b, 1e-16)?
    };
    Ok(crate::lsc::layered_water_filling(total, sys.active(), sys.layers()))
}

/// Optimal single-frame superposition allocation spending the battery.
///
/// The transmission duration follows from the stationarity root at the
/// frame's actual harvest; the radiated power is water-filled over the
/// active layers.
pub fn solve_lsc_single(sys: &System, b0: f64, u: f64) -> Result<LscAllocation> {
    Ok(LscAllocation {
        frames: vec![solve_lsc_frame(sys, b0, u)?],
    })
}

pub(crate) fn solve_lsc_frame(sys: &System, b0: f64, u: f64) -> Result<LscFrame> {
    let sup = sys.supply(u);
    let plan = closed_form_duration(sys.lsc_curve(), &sup, sys.p_c(), sys.tau(), sys.b_max(), b0)?;
    Ok(LscFrame::from_mode(sys, u, plan.phi, plan.supply))
}

/// Best superposition frame moving the battery from `b` to at least `b_end`.
pub fn plan_lsc_frame(sys: &System, u: f64, b: f64, b_end: f64) -> Option<LscFrame> {
    let sup = sys.supply(u);
    let plan = optimize_duration(sys.lsc_curve(), &sup, sys.p_c(), sys.tau(), sys.b_max(), b, b_end)?;
    Some(LscFrame::from_mode(sys, u, plan.phi, plan.supply))
}
