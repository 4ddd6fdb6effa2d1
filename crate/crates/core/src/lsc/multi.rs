use crate::alloc::{LscAllocation, LscFrame};
use crate::error::{invalid, Result};
use crate::frame::{supply_floor, Supply};
use crate::lsc::single::{plan_lsc_frame, solve_lsc_frame};
use crate::model::HarvestProfile;
use crate::multiframe::split_energy;
use crate::roots::{brent, scan_brackets};
use crate::system::System;
use crate::Strategy;

/// Cumulative energy consumed by the end of each frame along the taut string
/// between `lower` and `upper`, starting at zero and ending at `upper[K-1]`.
pub fn taut_string(lower: &[f64], upper: &[f64]) -> Vec<f64> {
    let n = upper.len();
    let mut out = vec![0.0; n];
    let (mut k0, mut c0) = (0usize, 0.0);
    let bound = |j: usize, lo: bool| {
        if j + 1 == n {
            upper[n - 1]
        } else if lo {
            lower[j]
        } else {
            upper[j]
        }
    };
    while k0 < n {
        let mut up = (f64::INFINITY, k0);
        let mut dn = (f64::NEG_INFINITY, k0);
        let mut vertex = None;
        for j in k0..n {
            let w = (j + 1 - k0) as f64;
            let base = if k0 == 0 { 0.0 } else { c0 };
            let su = (bound(j, false) - base) / w;
            let sl = (bound(j, true) - base) / w;
            if su < up.0 {
                if su < dn.0 {
                    vertex = Some((dn.1, bound(dn.1, true)));
                    break;
                }
                up = (su, j);
            }
            if sl > dn.0 {
                if sl > up.0 {
                    vertex = Some((up.1, bound(up.1, false)));
                    break;
                }
                dn = (sl, j);
            }
        }
        let (end, c_end) = vertex.unwrap_or((n - 1, upper[n - 1]));
        let base = if k0 == 0 { 0.0 } else { c0 };
        let slope = (c_end - base) / (end + 1 - k0) as f64;
        for j in k0..=end {
            out[j] = base + slope * (j + 1 - k0) as f64;
        }
        out[end] = c_end;
        c0 = c_end;
        k0 = end + 1;
    }
    out
}

/// Per-frame uniform powers of the optimal superposition schedule for a
/// lossless battery without circuit power.
pub fn lsc_ideal_powers(sys: &System, profile: &HarvestProfile) -> Vec<f64> {
    let tau = sys.tau();
    let b0 = sys.battery.b_0;
    let mut acc = b0;
    let upper: Vec<f64> = profile
        .u
        .iter()
        .map(|&u| {
            acc += u * tau;
            acc
        })
        .collect();
    let lower: Vec<f64> = upper.iter().map(|&x| (x - sys.b_max()).max(0.0)).collect();
    let used = taut_string(&lower, &upper);
    let mut prev = 0.0;
    used.iter()
        .map(|&c| {
            let p = ((c - prev) / tau).max(0.0);
            prev = c;
            p
        })
        .collect()
}

/// Optimal superposition schedule over `K` frames for a lossless battery
/// without circuit power; powers stay constant between battery-empty and
/// battery-full instants.
pub fn solve_lsc_multiframe_ideal(sys: &System, profile: &HarvestProfile) -> Result<LscAllocation> {
    if !sys.battery.is_ideal() || sys.p_c() != 0.0 {
        return Err(invalid("r", "the ideal multi-frame solver needs r = 0 and p_c = 0"));
    }
    let frames = lsc_ideal_powers(sys, profile)
        .into_iter()
        .zip(&profile.u)
        .map(|(p, &u)| LscFrame::from_mode(sys, u, sys.tau(), p))
        .collect();
    Ok(LscAllocation { frames })
}

/// Optimal superposition schedule over `K` frames for an unbounded battery.
pub fn solve_lsc_multiframe_convex(sys: &System, profile: &HarvestProfile) -> Result<LscAllocation> {
    if sys.b_max().is_finite() {
        return Err(invalid("b_max", "the multi-frame solver needs an unbounded battery"));
    }
    let mut b = sys.battery.b_0;
    let split = split_energy(sys, Strategy::Lsc, &profile.u, b);
    let mut frames = Vec::with_capacity(profile.len());
    for (k, &u) in profile.u.iter().enumerate() {
        let target = split.levels[k].min(b + sys.tau() * sys.supply(u).idle);
        let f = plan_lsc_frame(sys, u, b, target).unwrap_or_else(|| LscFrame::zero(u, sys.layers()));
        b = f.end_battery(b, sys).max(0.0);
        frames.push(f);
    }
    Ok(LscAllocation { frames })
}

/// Marginal value of battery energy in a mode transmitting at supply `d`.
fn marginal(sys: &System, sup: &Supply, d: f64) -> f64 {
    let p = (d - sys.p_c()).max(0.0);
    let gs = sup.drain_slope(d);
    if gs.is_infinite() {
        0.0
    } else {
        sys.lsc_curve().slope(p) / gs
    }
}

fn pair(sys: &System, u: [f64; 2], first: LscFrame, b0: f64) -> Result<LscAllocation> {
    let b1 = first.end_battery(b0, sys).clamp(0.0, sys.b_max());
    let second = solve_lsc_frame(sys, b1, u[1])?;
    Ok(LscAllocation {
        frames: vec![first, second],
    })
}

/// Two-frame superposition schedule.
///
/// When the first frame alone would transmit for the whole frame, energy is
/// moved across the frame boundary until the marginal value of stored
/// energy is equal in both frames: by drawing less from the battery in the
/// first frame, or by charging it from the first frame's harvest. Otherwise
/// the frames are solved independently. A search over the carried energy
/// guards the case analysis.
pub fn solve_lsc_two_frame(sys: &System, profile: &HarvestProfile) -> Result<LscAllocation> {
    if profile.len() != 2 {
        return Err(invalid("u", format!("two frames expected, got {}", profile.len())));
    }
    let u = [profile.u[0], profile.u[1]];
    let b0 = sys.battery.b_0;
    let tau = sys.tau();
    let s1 = sys.supply(u[0]);
    let first_alone = solve_lsc_frame(sys, b0, u[0])?;

    let mut best = if first_alone.phi < tau {
        pair(sys, u, first_alone, b0)?
    } else {
        let floor = supply_floor(&s1, sys.p_c());
        let b1_hi = (b0 + tau * s1.idle).min(sys.b_max());
        let b1_lo = (b0 - tau * s1.drain_max()).max(0.0);
        let b1_cap = (b0 - tau * s1.drain(floor)).min(b1_hi);
        let first_at = |b1: f64| {
            let d = s1.supply((b0 - b1) / tau).max(floor);
            LscFrame::from_mode(sys, u[0], tau, d)
        };
        let gap = |b1: f64| {
            let d1 = s1.supply((b0 - b1) / tau).max(floor);
            let v1 = marginal(sys, &s1, d1);
            let v2 = match solve_lsc_frame(sys, b1, u[1]) {
                Ok(f) if f.phi > 0.0 => {
                    let s2 = sys.supply(u[1]);
                    marginal(sys, &s2, f.segment().power(&s2, &sys.battery, 0.0))
                }
                _ => f64::INFINITY,
            };
            v1 - v2
        };
        let b1 = if b1_cap <= b1_lo {
            b1_lo
        } else if gap(b1_lo) >= 0.0 {
            b1_lo
        } else if gap(b1_cap) <= 0.0 {
            b1_cap
        } else {
            scan_brackets(gap, b1_lo, b1_cap, 64, false)
                .first()
                .and_then(|&(a, c)| if a == c { Some(a) } else { brent(gap, a, c, 1e-15).ok() })
                .unwrap_or(b1_lo)
        };
        pair(sys, u, first_at(b1), b0)?
    };

    if let Some(alt) = transfer_search(sys, u, b0) {
        let scale = 1e-12 * (1.0 + best.objective(sys).abs());
        if alt.objective(sys) > best.objective(sys) + scale {
            best = alt;
        }
    }
    Ok(best)
}

/// Best split found by scanning the energy carried into the second frame.
fn transfer_search(sys: &System, u: [f64; 2], b0: f64) -> Option<LscAllocation> {
    let tau = sys.tau();
    let s1 = sys.supply(u[0]);
    let hi = (b0 + tau * s1.idle).min(sys.b_max());
    if hi <= 0.0 {
        return None;
    }
    let total = |b1: f64| -> Option<(f64, LscAllocation)> {
        let first = plan_lsc_frame(sys, u[0], b0, b1)?;
        let a = pair(sys, u, first, b0).ok()?;
        Some((a.objective(sys), a))
    };
    let value = |b1: f64| total(b1).map_or(f64::NEG_INFINITY, |t| t.0);
    let n = 64;
    let grid: Vec<f64> = (0..=n).map(|i| hi * i as f64 / n as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&b| value(b)).collect();
    let (imax, _) = vals
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let (mut a, mut c) = (grid[imax.saturating_sub(1)], grid[(imax + 1).min(n)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (c - g * (c - a), a + g * (c - a));
    let (mut f1, mut f2) = (value(x1), value(x2));
    for _ in 0..60 {
        if f1 >= f2 {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - g * (c - a);
            f1 = value(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (c - a);
            f2 = value(x2);
        }
    }
    let mut cands = vec![grid[imax], 0.5 * (a + c)];
    cands.push(if f1 >= f2 { x1 } else { x2 });
    cands
        .into_iter()
        .filter_map(total)
        .max_by(|x, y| x.0.total_cmp(&y.0))
        .map(|t| t.1)
}
