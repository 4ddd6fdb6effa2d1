use crate::alloc::{FrameAlloc, LscFrame, LtmFrame, Segment};
use crate::frame::{mode_stationarity, Supply};
use crate::ltm::exhaustion_derivative;
use crate::system::System;

/// Per-frame slacks of every constraint; negative entries are violations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeasibilityReport {
    /// Lowest battery level reached in the frame (joule).
    pub causality: Vec<f64>,
    /// Lowest headroom below the capacity (joule).
    pub capacity: Vec<f64>,
    /// Lowest surplus of delivered power over circuit plus radiated power (watt).
    pub supply: Vec<f64>,
    /// Lowest slack of the box constraints on lengths, energies and drains.
    pub boxes: Vec<f64>,
    /// Largest product of charging time and discharged energy.
    pub complementarity: Vec<f64>,
}

impl FeasibilityReport {
    pub fn min_slack(&self) -> f64 {
        self.causality
            .iter()
            .chain(&self.capacity)
            .chain(&self.supply)
            .chain(&self.boxes)
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_complementarity(&self) -> f64 {
        self.complementarity.iter().copied().fold(0.0, f64::max)
    }

    /// First frame whose battery level drops below `-tol`.
    pub fn first_causality_violation(&self, tol: f64) -> Option<usize> {
        self.causality.iter().position(|&s| s < -tol)
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.min_slack() >= -tol && self.max_complementarity() <= tol
    }
}

/// Checks energy causality, capacity, power balance, box constraints and
/// that no segment both charges and discharges, for frames starting from
/// battery level `b0`.
pub fn feasibility_check(sys: &System, frames: &[FrameAlloc], b0: f64) -> FeasibilityReport {
    let bat = &sys.battery;
    let tau = sys.tau();
    let mut rep = FeasibilityReport::default();
    let mut b = b0;
    for f in frames {
        let u = f.u();
        let sup = Supply::new(u, bat);
        let mut causality = b;
        let mut capacity = sys.b_max() - b;
        let mut supply = f64::INFINITY;
        let mut boxes = tau - f.phi();
        boxes = boxes.min(f.phi());
        let mut comp: f64 = 0.0;
        let idle = bat.f_c(bat.idle_charge_power(u));
        let mut level = (b + (tau - f.phi()).max(0.0) * idle).min(sys.b_max().max(b));
        capacity = capacity.min(sys.b_max() - level);
        let segs: Vec<(Segment, f64)> = match f {
            FrameAlloc::Ltm(x) => {
                let used: f64 = x.l.iter().sum();
                boxes = boxes.min(x.phi - used + 1e-12 * tau);
                (0..x.l.len())
                    .filter(|&i| x.l[i] > 0.0 || x.e[i] > 0.0)
                    .map(|i| (x.segments()[i], x.p[i]))
                    .collect()
            }
            FrameAlloc::Lsc(x) => {
                if x.phi > 0.0 || x.e > 0.0 {
                    vec![(x.segment(), x.total_power())]
                } else {
                    Vec::new()
                }
            }
        };
        for (s, p) in segs {
            boxes = boxes.min(s.len).min(s.beta).min(s.len - s.beta).min(s.e).min(p);
            comp = comp.max(((s.len - s.beta) * s.e).max(0.0));
            if s.len <= 0.0 {
                boxes = boxes.min(-s.e);
                continue;
            }
            let x = s.e / s.len;
            if bat.peak().is_finite() {
                boxes = boxes.min(bat.peak() - x);
            }
            let delivered = s.beta * u / s.len + bat.f_d(x.min(bat.peak()));
            supply = supply.min(delivered - sys.p_c() - p);
            level += s.delta(&sup, bat);
            causality = causality.min(level);
            capacity = capacity.min(sys.b_max() - level);
        }
        rep.causality.push(causality);
        rep.capacity.push(capacity);
        rep.supply.push(if supply.is_finite() { supply } else { 0.0 });
        rep.boxes.push(boxes);
        rep.complementarity.push(comp);
        b = level;
    }
    rep
}

/// Relative stationarity residuals of a superposition frame started at
/// battery level `b0` and spending it.
///
/// For every active layer with positive rate, the deviation of
/// `lambda exp(sum_{j<=i} R_j / phi)` from `p_i / (s_i - s_{i+1})` under the
/// least-squares `lambda`; the dual-feasibility shortfall for active layers
/// without rate; the rate of merged layers; and, for `0 < phi < tau`, the
/// duration balance.
pub fn kkt_residuals_lsc(sys: &System, f: &LscFrame, b0: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if f.phi <= 0.0 {
        return out;
    }
    let act = sys.active();
    let mut prefix = vec![0.0; f.rates.len()];
    let mut acc = 0.0;
    for (i, r) in f.rates.iter().enumerate() {
        acc += r / f.phi;
        prefix[i] = acc;
    }
    let rate_tol = 1e-12;
    let targets: Vec<(f64, f64, bool)> = act
        .indices
        .iter()
        .enumerate()
        .map(|(m, &i)| {
            let c = act.merged_p[m] / (act.s[m] - act.s[m + 1]);
            (c, prefix[i].exp(), f.rates[i] > rate_tol)
        })
        .collect();
    let (num, den) = targets
        .iter()
        .filter(|t| t.2)
        .fold((0.0, 0.0), |(n, d), &(c, e, _)| (n + c * e / (c * c), d + e * e / (c * c)));
    let lambda = if den > 0.0 { num / den } else { 0.0 };
    for &(c, e, on) in &targets {
        if on {
            out.push((lambda * e - c) / c);
        } else if lambda > 0.0 {
            out.push(((c - lambda * e) / c).max(0.0));
        }
    }
    for i in 0..f.rates.len() {
        if !act.indices.contains(&i) {
            out.push(f.rates[i].abs());
        }
    }
    let sup = sys.supply(f.u);
    let capped = b0 + (sys.tau() - f.phi) * sup.idle > sys.b_max();
    let x = f.e / f.phi;
    let curve = sys.lsc_curve();
    let p = f.total_power();
    let scale = curve.value(p).max(1e-300);
    let s = mode_stationarity(curve, &sup, sys.p_c(), sup.idle, x) / scale;
    if f.phi < sys.tau() * (1.0 - 1e-12) && !capped {
        out.push(s);
    } else if f.phi >= sys.tau() * (1.0 - 1e-12) {
        out.push((-s).max(0.0));
    }
    out
}

/// Relative stationarity residuals of a time-multiplexed frame started at
/// battery level `b0` and spending it.
///
/// One partition shorter than the frame: the duration balance. Two
/// partitions with a common energy price: the price mismatch and the tie of
/// the priced values. Two partitions with the battery emptied in between:
/// the derivative of the rate in the first partition's length.
pub fn kkt_residuals_ltm(sys: &System, f: &LtmFrame, b0: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let parts: Vec<usize> = (0..f.l.len()).filter(|&i| f.l[i] > 1e-12 * sys.tau()).collect();
    if parts.is_empty() {
        return out;
    }
    let sup = sys.supply(f.u);
    let p_c = sys.p_c();
    let supply_of = |i: usize| f.p[i] + p_c;
    match parts.as_slice() {
        [i] => {
            let curve = sys.layer_curve(*i);
            let x = f.e[*i] / f.l[*i];
            let scale = curve.value(f.p[*i]).max(1e-300);
            let s = mode_stationarity(curve, &sup, p_c, sup.idle, x) / scale;
            let capped = b0 + (sys.tau() - f.phi) * sup.idle > sys.b_max();
            if f.phi < sys.tau() * (1.0 - 1e-12) {
                if !capped {
                    out.push(s);
                }
            } else {
                out.push((-s).max(0.0));
            }
        }
        [i, j] => {
            let (i, j) = (*i, *j);
            let level_mid = b0 - f.l[i] * sup.drain(supply_of(i));
            let yj = sup.drain(supply_of(j));
            let scale = sys
                .layer_curve(i)
                .value(f.p[i])
                .max(sys.layer_curve(j).value(f.p[j]))
                .max(1e-300);
            if level_mid <= 1e-12 * (1.0 + b0) && yj <= 1e-15 {
                let d = exhaustion_derivative(sys, &sup, i, j, b0, 0.0, f.l[i]);
                out.push(d / scale);
            } else {
                let price = |m: usize| {
                    let d = supply_of(m);
                    sys.layer_curve(m).slope(f.p[m]) / sup.drain_slope(d)
                };
                let (li, lj) = (price(i), price(j));
                let lam = 0.5 * (li + lj);
                out.push((li - lj) / lam);
                let mu = |m: usize| sys.layer_curve(m).value(f.p[m]) - lam * sup.drain(supply_of(m));
                out.push((mu(i) - mu(j)) / scale);
            }
        }
        _ => out.push(f64::INFINITY),
    }
    out
}
