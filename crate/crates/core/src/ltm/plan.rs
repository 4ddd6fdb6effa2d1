use crate::alloc::LtmFrame;
use crate::frame::{optimize_duration, price_mode, supply_floor, Supply};
use crate::ltm::single::{exhaustion_candidate, keep_best, modes_feasible, modes_value, Candidate};
use crate::system::System;

/// Best layer and its priced mode at `lambda`, ties broken towards the
/// smaller layer index.
fn best_layer(sys: &System, sup: &Supply, lambda: f64) -> Option<(usize, crate::frame::Priced)> {
    let mut best: Option<(usize, crate::frame::Priced)> = None;
    for i in 0..sys.layers() {
        if let Some(p) = price_mode(sys.layer_curve(i), sup, sys.p_c(), lambda) {
            if best.map_or(true, |(_, b)| p.value > b.value) {
                best = Some((i, p));
            }
        }
    }
    best
}

/// Two partitions filling the whole frame at average drain `y`, from the
/// price at which the per-layer demand crosses `y`.
fn full_frame_pair(sys: &System, sup: &Supply, y: f64) -> Option<Vec<(usize, f64, f64)>> {
    let tau = sys.tau();
    let floor = supply_floor(sup, sys.p_c());
    let y_floor = sup.drain(floor);
    if y <= y_floor || y >= sup.drain_max() {
        return None;
    }
    let gs = sup.drain_slope(floor);
    let top = (0..sys.layers())
        .map(|i| sys.layer_curve(i).slope(0.0))
        .fold(0.0, f64::max)
        / gs;
    let demand = |l: f64| best_layer(sys, sup, l).map_or(f64::NEG_INFINITY, |(_, p)| p.drain);
    let (mut a, mut c) = ((top * 1e-14).ln(), top.ln());
    if demand(a.exp()) < y {
        return None;
    }
    for _ in 0..100 {
        let m = 0.5 * (a + c);
        if demand(m.exp()) >= y {
            a = m;
        } else {
            c = m;
        }
    }
    let (i, pi) = best_layer(sys, sup, a.exp())?;
    let (j, pj) = best_layer(sys, sup, c.exp())?;
    if i == j || (pi.drain - pj.drain).abs() <= 1e-15 {
        let d = sup.supply(y);
        return Some(vec![(i, tau, d)]);
    }
    let li = (tau * (y - pj.drain) / (pi.drain - pj.drain)).clamp(0.0, tau);
    Some(vec![(i, li, pi.supply), (j, tau - li, pj.supply)])
}

/// Best time-multiplexed frame moving the battery from `b` to at least
/// `b_end`. `None` when `b_end` is unreachable even by idling.
pub fn plan_ltm_frame(sys: &System, u: f64, b: f64, b_end: f64) -> Option<LtmFrame> {
    let sup = sys.supply(u);
    let tau = sys.tau();
    let mut best: Option<Candidate> = None;
    let mut reachable = false;
    for i in 0..sys.layers() {
        if let Some(plan) = optimize_duration(sys.layer_curve(i), &sup, sys.p_c(), tau, sys.b_max(), b, b_end) {
            reachable = true;
            if plan.phi > 0.0 {
                keep_best(
                    &mut best,
                    Candidate {
                        modes: vec![(i, plan.phi, plan.supply)],
                        value: plan.value,
                    },
                );
            }
        }
    }
    if !reachable {
        return None;
    }
    if sys.layers() > 1 {
        let y = (b - b_end) / tau;
        if let Some(mut modes) = full_frame_pair(sys, &sup, y) {
            modes.sort_by_key(|m| m.0);
            if modes_feasible(sys, &sup, &modes, b, b_end) {
                let value = modes_value(sys, &modes);
                keep_best(&mut best, Candidate { modes, value });
            } else if modes.len() == 2 {
                if let Some(c) = exhaustion_candidate(sys, &sup, modes[0].0, modes[1].0, b, b_end) {
                    if modes_feasible(sys, &sup, &c.modes, b, b_end) {
                        keep_best(&mut best, c);
                    }
                }
            }
        }
    }
    Some(match best {
        Some(c) => LtmFrame::from_modes(sys, u, &c.modes),
        None => LtmFrame::zero(u, sys.layers()),
    })
}
