use crate::alloc::{LtmAllocation, LtmFrame};
use crate::error::{invalid, Result};
use crate::ltm::plan::plan_ltm_frame;
use crate::ltm::single::solve_ltm_frame;
use crate::model::HarvestProfile;
use crate::multiframe::split_energy;
use crate::system::System;
use crate::Strategy;

/// Follows per-frame battery targets with the best frame plan for each.
fn follow_levels(sys: &System, u: &[f64], b0: f64, levels: &[f64]) -> LtmAllocation {
    let mut frames = Vec::with_capacity(u.len());
    let mut b = b0;
    for (k, &uk) in u.iter().enumerate() {
        let target = levels[k].min(b + sys.tau() * sys.supply(uk).idle);
        let f = plan_ltm_frame(sys, uk, b, target).unwrap_or_else(|| LtmFrame::zero(uk, sys.layers()));
        b = f.end_battery(b, sys).max(0.0);
        frames.push(f);
    }
    LtmAllocation { frames }
}

/// Optimal time-multiplexed schedule over `K` frames for an unbounded
/// battery, starting from `sys.battery.b_0`.
pub fn solve_ltm_multiframe_convex(sys: &System, profile: &HarvestProfile) -> Result<LtmAllocation> {
    if sys.b_max().is_finite() {
        return Err(invalid("b_max", "the multi-frame solver needs an unbounded battery"));
    }
    let b0 = sys.battery.b_0;
    let split = split_energy(sys, Strategy::Ltm, &profile.u, b0);
    Ok(follow_levels(sys, &profile.u, b0, &split.levels))
}

/// Two-frame time-multiplexed schedule: solve without the capacity limit and
/// keep that solution if it never overfills the battery; otherwise carry
/// exactly `B_max` into the second frame.
pub fn solve_ltm_two_frame(sys: &System, profile: &HarvestProfile) -> Result<LtmAllocation> {
    if profile.len() != 2 {
        return Err(invalid("u", format!("two frames expected, got {}", profile.len())));
    }
    let b0 = sys.battery.b_0;
    let b_max = sys.b_max();
    if b_max.is_infinite() {
        return solve_ltm_multiframe_convex(sys, profile);
    }
    let mut relaxed_bat = sys.battery;
    relaxed_bat.b_max = f64::INFINITY;
    let relaxed_sys = sys.with_battery(relaxed_bat);
    let relaxed = solve_ltm_multiframe_convex(&relaxed_sys, profile)?;
    let b1 = relaxed.frames[0].end_battery(b0, &relaxed_sys);
    if b1 <= b_max && within_capacity(sys, &relaxed, b0) {
        return Ok(relaxed);
    }
    let (u1, u2) = (profile.u[0], profile.u[1]);
    let carry = b1.min(b_max);
    let first = if carry <= 0.0 {
        solve_ltm_frame(sys, b0, u1)?
    } else {
        plan_ltm_frame(sys, u1, b0, carry).map_or_else(|| solve_ltm_frame(sys, b0, u1), Ok)?
    };
    let b = first.end_battery(b0, sys).clamp(0.0, b_max);
    let second = solve_ltm_frame(sys, b, u2)?;
    Ok(LtmAllocation {
        frames: vec![first, second],
    })
}

/// Whether an allocation keeps the battery at or below `B_max` at every
/// partition boundary.
fn within_capacity(sys: &System, alloc: &LtmAllocation, b0: f64) -> bool {
    let tol = 1e-9;
    let mut b = b0;
    for f in &alloc.frames {
        let sup = sys.supply(f.u);
        let mut level = b + (sys.tau() - f.phi).max(0.0) * sup.idle;
        if level > sys.b_max() + tol {
            return false;
        }
        for s in f.segments() {
            level += s.delta(&sup, &sys.battery);
            if level > sys.b_max() + tol {
                return false;
            }
        }
        b = level.max(0.0);
    }
    true
}
