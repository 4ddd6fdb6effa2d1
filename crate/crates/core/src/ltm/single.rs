use crate::alloc::{LtmAllocation, LtmFrame};
use crate::error::{Error, Result};
use crate::frame::{closed_form_duration, price_mode, supply_floor, Supply};
use crate::model::{rate, ChannelDist};
use crate::roots::{brent, decreasing_root, scan_brackets, SCAN_POINTS};
use crate::system::System;

/// A candidate frame: `(layer, length, supply)` triples and its objective.
#[derive(Debug, Clone)]
pub(crate) struct Candidate {
    pub modes: Vec<(usize, f64, f64)>,
    pub value: f64,
}

impl Candidate {
    fn better_than(&self, other: &Option<Candidate>) -> bool {
        match other {
            None => true,
            Some(o) => self.value > o.value,
        }
    }
}

pub(crate) fn keep_best(best: &mut Option<Candidate>, c: Candidate) {
    if c.better_than(best) {
        *best = Some(c);
    }
}

/// Pair equation of the ideal case: `ln(lambda) - a lambda - b` for layers
/// `i < j`.
pub fn ideal_pair_equation(dist: &ChannelDist, i: usize, j: usize, lambda: f64) -> f64 {
    let (q, s) = (dist.q(), dist.s());
    let dq = q[i] - q[j];
    let a = (s[i] - s[j]) / dq;
    let b = -1.0 + (q[i] * (q[i] / s[i]).ln() - q[j] * (q[j] / s[j]).ln()) / dq;
    lambda.ln() - a * lambda - b
}

/// Roots of the ideal pair equation; at most two.
pub fn ideal_pair_roots(dist: &ChannelDist, i: usize, j: usize) -> Vec<f64> {
    let (q, h) = (dist.q(), dist.h());
    if q[i] - q[j] <= 0.0 {
        return Vec::new();
    }
    let top = (q[i] * h[i]).max(q[j] * h[j]);
    let lo = top * 1e-12;
    let f = |l: f64| ideal_pair_equation(dist, i, j, l);
    scan_brackets(f, lo, top, SCAN_POINTS, true)
        .into_iter()
        .filter_map(|(a, b)| brent(f, a, b, 1e-15 * b).ok())
        .collect()
}

/// Early-exhaustion equation of the ideal case: battery emptied at the end
/// of partition `i`, partition `j` on harvest alone.
pub fn ideal_exhaustion_equation(dist: &ChannelDist, i: usize, j: usize, b0: f64, u: f64, l: f64) -> f64 {
    let (q, h) = (dist.q(), dist.h());
    let pi = u + b0 / l;
    q[i] * h[i] * (pi - u) / (1.0 + h[i] * pi) - q[i] * rate(h[i] * pi) + q[j] * rate(h[j] * u)
}

fn ideal_value(dist: &ChannelDist, modes: &[(usize, f64, f64)]) -> f64 {
    modes
        .iter()
        .map(|&(m, l, p)| dist.q()[m] * l * rate(dist.h()[m] * p.max(0.0)))
        .sum()
}

/// Optimal single-frame time-multiplexed allocation for a lossless battery
/// and no circuit power. At most two partitions carry data.
///
/// `dist` holds effective gains (SNR per watt).
pub fn solve_ltm_single_ideal(b0: f64, u: f64, tau: f64, dist: &ChannelDist) -> Result<LtmAllocation> {
    let n = dist.len();
    let energy = b0 + u * tau;
    let frame = |modes: &[(usize, f64, f64)]| {
        let mut f = LtmFrame::zero(u, n);
        for &(m, l, p) in modes {
            if l <= 0.0 {
                continue;
            }
            f.l[m] = l;
            f.p[m] = p;
            if p >= u {
                f.beta[m] = l;
                f.e[m] = (p - u) * l;
            } else {
                f.beta[m] = if u > 0.0 { l * p / u } else { l };
            }
        }
        f.phi = f.l.iter().sum::<f64>().min(tau);
        f
    };
    if energy <= 0.0 {
        return Ok(LtmAllocation {
            frames: vec![LtmFrame::zero(u, n)],
        });
    }
    let mut best: Option<Candidate> = None;
    for m in 0..n {
        let modes = vec![(m, tau, energy / tau)];
        let value = ideal_value(dist, &modes);
        keep_best(&mut best, Candidate { modes, value });
    }
    let tol = 1e-12 * (1.0 + energy);
    for i in 0..n {
        for j in (i + 1)..n {
            for lambda in ideal_pair_roots(dist, i, j) {
                let pi = (dist.q()[i] / lambda - dist.s()[i]).max(0.0);
                let pj = (dist.q()[j] / lambda - dist.s()[j]).max(0.0);
                if (pi - pj).abs() <= 1e-15 * (pi + pj) {
                    continue;
                }
                let li = (energy - tau * pj) / (pi - pj);
                if !(-tol..=tau + tol).contains(&li) {
                    continue;
                }
                let li = li.clamp(0.0, tau);
                let lj = tau - li;
                let modes = if b0 + u * li - li * pi >= -tol {
                    vec![(i, li, pi), (j, lj, pj)]
                } else {
                    match ideal_exhaustion(dist, i, j, b0, u, tau) {
                        Some(m) => m,
                        None => continue,
                    }
                };
                let value = ideal_value(dist, &modes);
                keep_best(&mut best, Candidate { modes, value });
            }
        }
    }
    let best = best.expect("at least one single-layer candidate");
    Ok(LtmAllocation {
        frames: vec![frame(&best.modes)],
    })
}

fn ideal_exhaustion(dist: &ChannelDist, i: usize, j: usize, b0: f64, u: f64, tau: f64) -> Option<Vec<(usize, f64, f64)>> {
    if b0 <= 0.0 {
        return None;
    }
    let f = |l: f64| ideal_exhaustion_equation(dist, i, j, b0, u, l);
    let mut ls: Vec<f64> = scan_brackets(f, tau * 1e-12, tau, SCAN_POINTS, true)
        .into_iter()
        .filter_map(|(a, b)| brent(f, a, b, 1e-15 * b).ok())
        .collect();
    ls.push(tau);
    let mut best: Option<(f64, Vec<(usize, f64, f64)>)> = None;
    for l in ls {
        let modes = vec![(i, l, u + b0 / l), (j, tau - l, u)];
        let v = ideal_value(dist, &modes);
        if best.as_ref().map_or(true, |(bv, _)| v > *bv) {
            best = Some((v, modes));
        }
    }
    best.map(|(_, m)| m)
}

/// Pair tie of the general case: `mu_i(lambda) - mu_j(lambda)` where
/// `mu_m(lambda) = max_D q_m G(h_m (D - P_C)) - lambda g(D)`.
pub fn pair_tie_residual(sys: &System, sup: &Supply, i: usize, j: usize, lambda: f64) -> f64 {
    let p_c = sys.p_c();
    let vi = price_mode(sys.layer_curve(i), sup, p_c, lambda).map_or(f64::NEG_INFINITY, |p| p.value);
    let vj = price_mode(sys.layer_curve(j), sup, p_c, lambda).map_or(f64::NEG_INFINITY, |p| p.value);
    vi - vj
}

/// Prices at which partitions `i` and `j` are equally attractive while at
/// least one of them radiates.
pub fn pair_tie_prices(sys: &System, sup: &Supply, i: usize, j: usize) -> Vec<f64> {
    let p_c = sys.p_c();
    let floor = supply_floor(sup, p_c);
    if floor > sup.d_max() {
        return Vec::new();
    }
    let gs = sup.drain_slope(floor);
    let top = sys.layer_curve(i).slope(0.0).max(sys.layer_curve(j).slope(0.0)) / gs;
    if !(top > 0.0 && top.is_finite()) {
        return Vec::new();
    }
    let lo = top * 1e-12;
    let hi = top * (1.0 - 1e-12);
    let f = |l: f64| pair_tie_residual(sys, sup, i, j, l);
    scan_brackets(f, lo, hi, SCAN_POINTS, true)
        .into_iter()
        .filter_map(|(a, b)| if a == b { Some(a) } else { brent(f, a, b, 1e-15 * b).ok() })
        .collect()
}

/// Derivative in `l` of the pair objective when partition `i` (first) empties
/// the battery from `b` and partition `j` ends the frame at `b_end`.
pub fn exhaustion_derivative(sys: &System, sup: &Supply, i: usize, j: usize, b: f64, b_end: f64, l: f64) -> f64 {
    let tau = sys.tau();
    let p_c = sys.p_c();
    let part = |m: usize, y: f64| {
        let d = sup.supply(y);
        let c = sys.layer_curve(m);
        let p = (d - p_c).max(0.0);
        let gs = sup.drain_slope(d);
        c.value(p) - c.slope(p) * y / gs
    };
    part(i, b / l) - part(j, -b_end / (tau - l))
}

/// Pair with the battery exhausted at the end of the first partition.
pub(crate) fn exhaustion_candidate(
    sys: &System,
    sup: &Supply,
    i: usize,
    j: usize,
    b: f64,
    b_end: f64,
) -> Option<Candidate> {
    let tau = sys.tau();
    let p_c = sys.p_c();
    let floor = supply_floor(sup, p_c);
    if b <= 0.0 || floor > sup.d_max() {
        return None;
    }
    let y_floor = sup.drain(floor);
    let mut l_lo = (b / sup.drain_max()).max(0.0);
    let mut l_hi = tau;
    if y_floor > 0.0 {
        l_hi = l_hi.min(b / y_floor);
    }
    if b_end > 0.0 {
        if sup.idle <= 0.0 {
            return None;
        }
        l_hi = l_hi.min(tau - b_end / sup.idle);
        if y_floor < 0.0 {
            l_hi = l_hi.min(tau + b_end / y_floor);
        } else {
            return None;
        }
    } else if y_floor > 0.0 {
        return None;
    }
    l_lo = l_lo.max(tau * 1e-12);
    if l_lo >= l_hi {
        return None;
    }
    let l = decreasing_root(|l| exhaustion_derivative(sys, sup, i, j, b, b_end, l), l_lo, l_hi);
    let di = sup.supply(b / l);
    let dj = if tau - l > 0.0 { sup.supply(-b_end / (tau - l)) } else { sup.u };
    let modes = vec![(i, l, di), (j, tau - l, dj)];
    let value = modes_value(sys, &modes);
    Some(Candidate { modes, value })
}

pub(crate) fn modes_value(sys: &System, modes: &[(usize, f64, f64)]) -> f64 {
    modes
        .iter()
        .map(|&(m, l, d)| l * sys.layer_curve(m).value((d - sys.p_c()).max(0.0)))
        .sum()
}

/// Battery path check for partitions in layer order after the idle phase.
pub(crate) fn modes_feasible(sys: &System, sup: &Supply, modes: &[(usize, f64, f64)], b: f64, b_end: f64) -> bool {
    let tau = sys.tau();
    let used: f64 = modes.iter().map(|m| m.1).sum();
    let scale = 1e-9 * (1.0 + b + tau * (sup.idle + sup.u));
    let mut level = (b + (tau - used).max(0.0) * sup.idle).min(sys.b_max().max(b));
    let mut sorted = modes.to_vec();
    sorted.sort_by_key(|m| m.0);
    for &(_, l, d) in &sorted {
        if l <= 0.0 {
            continue;
        }
        if d < supply_floor(sup, sys.p_c()) * (1.0 - 1e-12) - 1e-15 {
            return false;
        }
        level -= l * sup.drain(d);
        if level < -scale || level > sys.b_max() + scale {
            return false;
        }
    }
    level >= b_end - scale && used <= tau * (1.0 + 1e-12)
}

/// Optimal single-frame time-multiplexed allocation spending the battery.
///
/// Single-partition candidates come from the stationarity root of each
/// layer; two-partition candidates from the price at which two layers tie,
/// or from the early-exhaustion balance when the first partition would
/// overdraw the battery. The best feasible candidate is returned.
pub fn solve_ltm_single(sys: &System, b0: f64, u: f64) -> Result<LtmAllocation> {
    Ok(LtmAllocation {
        frames: vec![solve_ltm_frame(sys, b0, u)?],
    })
}

pub(crate) fn solve_ltm_frame(sys: &System, b0: f64, u: f64) -> Result<LtmFrame> {
    let sup = sys.supply(u);
    let tau = sys.tau();
    let n = sys.layers();
    if b0 + tau * sup.idle <= 0.0 {
        return Ok(LtmFrame::zero(u, n));
    }
    let floor = supply_floor(&sup, sys.p_c());
    if floor > sup.d_max() {
        return Err(Error::NoFeasibleTransmission);
    }
    let mut best: Option<Candidate> = None;
    for i in 0..n {
        let plan = closed_form_duration(sys.layer_curve(i), &sup, sys.p_c(), tau, sys.b_max(), b0)?;
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
    for i in 0..n {
        for j in (i + 1)..n {
            for lambda in pair_tie_prices(sys, &sup, i, j) {
                let (Some(pi), Some(pj)) = (
                    price_mode(sys.layer_curve(i), &sup, sys.p_c(), lambda),
                    price_mode(sys.layer_curve(j), &sup, sys.p_c(), lambda),
                ) else {
                    continue;
                };
                if (pi.drain - pj.drain).abs() <= 1e-15 {
                    continue;
                }
                let li = ((b0 - tau * pj.drain) / (pi.drain - pj.drain)).clamp(0.0, tau);
                if li <= 0.0 || li >= tau {
                    continue;
                }
                let modes = vec![(i, li, pi.supply), (j, tau - li, pj.supply)];
                if modes_feasible(sys, &sup, &modes, b0, 0.0) {
                    let value = modes_value(sys, &modes);
                    keep_best(&mut best, Candidate { modes, value });
                } else if let Some(c) = exhaustion_candidate(sys, &sup, i, j, b0, 0.0) {
                    if modes_feasible(sys, &sup, &c.modes, b0, 0.0) {
                        keep_best(&mut best, c);
                    }
                }
            }
        }
    }
    Ok(match best {
        Some(c) => LtmFrame::from_modes(sys, u, &c.modes),
        None => LtmFrame::zero(u, n),
    })
}
