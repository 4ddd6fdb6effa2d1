//! Per-frame building blocks shared by both strategies.
//!
//! Inside one frame the transmitter idles (charging at `F_c(V_a*)`) and then
//! transmits. While transmitting it needs a total supply `D` (circuit plus
//! radiated power). Supplying `D` out of harvest `u` changes the battery at
//! the signed rate `-g(D)`, where `g(D) = F_d^{-1}(D - u)` when the battery
//! tops up the harvest and `g(D) = -F_c(u - D)` when surplus harvest is
//! stored. `g` is convex and increasing, which makes every single-mode
//! problem below concave.

use crate::error::{Error, Result};
use crate::model::BatteryParams;
use crate::roots::{
    bisect_last_nonneg, brent, decreasing_root, quadratic_root_in, scan_brackets, SCAN_POINTS,
};

/// Relative tolerance used for energy bookkeeping.
pub(crate) const ENERGY_TOL: f64 = 1e-12;

/// Battery drain as a function of supplied power for a fixed harvest.
#[derive(Debug, Clone, Copy)]
pub struct Supply {
    pub u: f64,
    k: f64,
    peak: f64,
    /// Idle accumulation rate `F_c(V_a*)`.
    pub idle: f64,
}

impl Supply {
    pub fn new(u: f64, bat: &BatteryParams) -> Self {
        Self {
            u,
            k: bat.loss(),
            peak: bat.peak(),
            idle: bat.idle_charge(u),
        }
    }

    #[inline]
    fn f(&self, x: f64) -> f64 {
        x - self.k * x * x
    }

    #[inline]
    fn f_inv(&self, y: f64) -> f64 {
        if self.k == 0.0 {
            return y;
        }
        let disc = (1.0 - 4.0 * self.k * y).max(0.0);
        2.0 * y / (1.0 + disc.sqrt())
    }

    /// Smallest supply considered; below it harvest would be wasted.
    #[inline]
    pub fn d_min(&self) -> f64 {
        (self.u - self.peak).max(0.0)
    }

    /// Largest supply: harvest plus the battery's peak delivery.
    #[inline]
    pub fn d_max(&self) -> f64 {
        if self.k == 0.0 {
            f64::INFINITY
        } else {
            self.u + 0.25 / self.k
        }
    }

    /// Largest drain rate (`v_b^2 / 2r`).
    #[inline]
    pub fn drain_max(&self) -> f64 {
        self.peak
    }

    /// Smallest (most negative) drain rate.
    #[inline]
    pub fn drain_min(&self) -> f64 {
        -self.idle
    }

    /// Signed battery drain rate `g(D)`.
    #[inline]
    pub fn drain(&self, d: f64) -> f64 {
        if d >= self.u {
            self.f_inv(d - self.u)
        } else {
            -self.f(self.u - d)
        }
    }

    /// `g'(D)`; infinite at the discharge peak.
    #[inline]
    pub fn drain_slope(&self, d: f64) -> f64 {
        if d >= self.u {
            let x = self.f_inv(d - self.u);
            let s = 1.0 - 2.0 * self.k * x;
            if s <= 0.0 {
                f64::INFINITY
            } else {
                1.0 / s
            }
        } else {
            1.0 - 2.0 * self.k * (self.u - d)
        }
    }

    /// Supply obtained at drain rate `y` (clamped to the attainable range).
    #[inline]
    pub fn supply(&self, y: f64) -> f64 {
        if y >= 0.0 {
            self.u + self.f(y.min(self.peak))
        } else {
            self.u - self.f_inv((-y).min(self.idle))
        }
    }

    /// Splits a supply into `(alpha, x)`: fraction of harvest routed to the
    /// radio and battery drain rate. Exactly one of `alpha < 1`, `x > 0` holds.
    pub fn split(&self, d: f64) -> (f64, f64) {
        if d >= self.u {
            (1.0, self.f_inv(d - self.u))
        } else if self.u > 0.0 {
            (d / self.u, 0.0)
        } else {
            (1.0, 0.0)
        }
    }
}

/// Rate-curve piece with marginal rate `q / (s + P)` on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub q: f64,
    pub s: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Concave rate per unit time as a function of radiated power, assembled from
/// logarithmic pieces on consecutive power ranges starting at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pieces: Vec<Piece>,
}

impl Curve {
    pub fn new(pieces: Vec<Piece>) -> Self {
        debug_assert!(!pieces.is_empty());
        Self { pieces }
    }

    /// `q ln(1 + h P)`.
    pub fn layer(q: f64, h: f64) -> Self {
        Self::new(vec![Piece {
            q,
            s: 1.0 / h,
            lo: 0.0,
            hi: f64::INFINITY,
        }])
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn value(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        let mut v = 0.0;
        for pc in &self.pieces {
            if p <= pc.lo {
                break;
            }
            let top = p.min(pc.hi);
            v += pc.q * ((top - pc.lo) / (pc.s + pc.lo)).ln_1p();
        }
        v
    }

    pub fn slope(&self, p: f64) -> f64 {
        let p = p.max(0.0);
        for pc in &self.pieces {
            if p < pc.hi {
                return pc.q / (pc.s + p);
            }
        }
        let pc = self.pieces.last().unwrap();
        pc.q / (pc.s + p)
    }

    /// Power at which the marginal rate equals `lambda` (zero if never).
    pub fn power_at_slope(&self, lambda: f64) -> f64 {
        for pc in &self.pieces {
            let p = pc.q / lambda - pc.s;
            if p < pc.hi {
                return p.max(pc.lo).max(0.0);
            }
        }
        f64::INFINITY
    }
}

/// Outcome of the inner pricing problem `max_D R(D - P_C) - lambda g(D)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Priced {
    pub supply: f64,
    pub rate: f64,
    pub drain: f64,
    pub value: f64,
}

/// Supplies below `p_c` cannot power the radio.
#[inline]
pub(crate) fn supply_floor(sup: &Supply, p_c: f64) -> f64 {
    p_c.max(sup.d_min())
}

/// Solves `max_D R(D - p_c) - lambda g(D)` over feasible supplies. Returns
/// `None` when the circuit cannot be powered at all.
pub fn price_mode(curve: &Curve, sup: &Supply, p_c: f64, lambda: f64) -> Option<Priced> {
    let lo = supply_floor(sup, p_c);
    let hi = sup.d_max();
    if lo > hi {
        return None;
    }
    let d = priced_supply(curve, sup, p_c, lambda, lo, hi);
    let rate = curve.value(d - p_c);
    let drain = sup.drain(d);
    Some(Priced {
        supply: d,
        rate,
        drain,
        value: rate - lambda * drain,
    })
}

fn priced_supply(curve: &Curve, sup: &Supply, p_c: f64, lambda: f64, lo: f64, hi: f64) -> f64 {
    // Stationarity h(D) = R'(D - p_c) - lambda g'(D) is decreasing in D.
    let h = |d: f64| {
        let gs = sup.drain_slope(d);
        if gs.is_infinite() {
            return f64::NEG_INFINITY;
        }
        curve.slope(d - p_c) - lambda * gs
    };
    if h(lo) <= 0.0 {
        return lo;
    }
    if hi.is_finite() && h(hi) >= 0.0 {
        return hi;
    }
    let k = sup.k;
    let a = sup.u - p_c;
    let drain_side = sup.u < lo || h(sup.u) >= 0.0;
    for pc in curve.pieces() {
        let plo = pc.lo + p_c;
        let phi = pc.hi + p_c;
        let (dlo, dhi) = if drain_side {
            (plo.max(sup.u), phi.min(hi))
        } else {
            (plo.max(lo), phi.min(sup.u))
        };
        if dlo >= dhi {
            continue;
        }
        if dhi < hi && h(dhi) > 0.0 && dhi.is_finite() {
            continue;
        }
        let root = if drain_side {
            // q F_d'(x) = lambda (s + a + F_d(x)), x = drain rate.
            let xlo = sup.f_inv(dlo - sup.u);
            let xhi = if dhi.is_finite() {
                sup.f_inv(dhi - sup.u)
            } else {
                f64::INFINITY
            };
            let xr = if k == 0.0 {
                (pc.q / lambda - pc.s - a).clamp(xlo, xhi)
            } else {
                quadratic_root_in(
                    lambda * k,
                    -(2.0 * pc.q * k + lambda),
                    pc.q - lambda * (pc.s + a),
                    xlo,
                    xhi.min(sup.peak),
                )
                .unwrap_or_else(|| {
                    bisect_x(|x| pc.q * (1.0 - 2.0 * k * x) - lambda * (pc.s + a + sup.f(x)), xlo, xhi)
                })
            };
            sup.u + sup.f(xr)
        } else {
            // q = lambda F_c'(V) (s + a - V), V = charging power.
            let vlo = sup.u - dhi;
            let vhi = sup.u - dlo;
            let vr = if k == 0.0 {
                (pc.s + a - pc.q / lambda).clamp(vlo, vhi)
            } else {
                quadratic_root_in(
                    2.0 * lambda * k,
                    -lambda * (1.0 + 2.0 * k * (pc.s + a)),
                    lambda * (pc.s + a) - pc.q,
                    vlo,
                    vhi,
                )
                .unwrap_or_else(|| {
                    // psi is increasing in V; negate for the decreasing solver.
                    bisect_x(
                        |v| lambda * (1.0 - 2.0 * k * v) * (pc.s + a - v) - pc.q,
                        vlo,
                        vhi,
                    )
                })
            };
            sup.u - vr
        };
        return root.clamp(lo, hi);
    }
    decreasing_root(h, lo, if hi.is_finite() { hi } else { lo + 1e12 })
}

fn bisect_x<F: FnMut(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    let hi = if hi.is_finite() { hi } else { lo + 1e12 };
    decreasing_root(f, lo, hi)
}

/// A single transmission mode sustained for `phi` seconds after idling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModePlan {
    pub phi: f64,
    /// Total supply while transmitting (circuit included).
    pub supply: f64,
    /// Battery drain rate while transmitting.
    pub drain: f64,
    /// Rate collected over the frame (`phi * R`).
    pub value: f64,
}

impl ModePlan {
    pub fn idle() -> Self {
        Self {
            phi: 0.0,
            supply: 0.0,
            drain: 0.0,
            value: 0.0,
        }
    }
}

/// Battery energy available for transmission when transmitting for `phi`.
#[inline]
pub(crate) fn available(b: f64, sup: &Supply, tau: f64, b_max: f64, phi: f64) -> f64 {
    (b + (tau - phi) * sup.idle).min(b_max)
}

/// Best single-mode plan over `phi in [0, tau]` moving the battery from `b` to
/// at least `b_end`. `None` when `b_end` is unreachable even by idling.
pub fn optimize_duration(
    curve: &Curve,
    sup: &Supply,
    p_c: f64,
    tau: f64,
    b_max: f64,
    b: f64,
    b_end: f64,
) -> Option<ModePlan> {
    let tol = ENERGY_TOL * (1.0 + b.abs() + b_end.abs() + tau * sup.idle);
    let avail = |phi: f64| available(b, sup, tau, b_max, phi) - b_end;
    if avail(0.0) < -tol || b_end > b_max + tol {
        return None;
    }
    let floor = supply_floor(sup, p_c);
    if floor > sup.d_max() {
        return Some(ModePlan::idle());
    }
    let y_req = sup.drain(floor);
    let slack = |phi: f64| avail(phi) - phi * y_req;
    let phi_b = if slack(tau) >= 0.0 {
        tau
    } else {
        bisect_last_nonneg(slack, 0.0, tau)
    };
    if phi_b <= 0.0 {
        return Some(ModePlan::idle());
    }
    let drain_at = |phi: f64| (avail(phi) / phi).min(sup.drain_max());
    let deriv = |phi: f64| {
        let y = drain_at(phi);
        let d = sup.supply(y);
        let p = (d - p_c).max(0.0);
        let r = curve.value(p);
        let gs = sup.drain_slope(d);
        if gs.is_infinite() || y >= sup.drain_max() {
            return r;
        }
        let capped = b + (tau - phi) * sup.idle > b_max;
        let da = if capped { 0.0 } else { -sup.idle };
        r - curve.slope(p) * (y - da) / gs
    };
    let phi = if deriv(phi_b) >= 0.0 {
        phi_b
    } else {
        decreasing_root(deriv, phi_b * 1e-15, phi_b)
    };
    let y = drain_at(phi).max(y_req);
    let d = sup.supply(y).max(floor);
    let p = (d - p_c).max(0.0);
    Some(ModePlan {
        phi,
        supply: d,
        drain: sup.drain(d),
        value: phi * curve.value(p),
    })
}

/// Stationarity of a single transmission mode in the drain rate `x`:
/// `S(x) = R(P) - R'(P) F_d'(x) (x + c)` with `P = u + F_d(x) - p_c`.
/// Increasing in `x`; its root balances transmitting longer against
/// transmitting harder.
pub fn mode_stationarity(curve: &Curve, sup: &Supply, p_c: f64, c: f64, x: f64) -> f64 {
    let p = (sup.u + sup.f(x) - p_c).max(0.0);
    let fd = (1.0 - 2.0 * sup.k * x).max(0.0);
    curve.value(p) - curve.slope(p) * fd * (x + c)
}

/// Smallest drain rate in `[x_lo, peak]` where [`mode_stationarity`]
/// vanishes, by sign scan and Brent refinement. `None` when `S(x_lo) >= 0`.
pub fn stationary_drain(curve: &Curve, sup: &Supply, p_c: f64, c: f64, x_lo: f64) -> Option<f64> {
    let s = |x: f64| mode_stationarity(curve, sup, p_c, c, x);
    if s(x_lo) >= 0.0 {
        return None;
    }
    let mut hi = sup.drain_max();
    if !hi.is_finite() {
        hi = (x_lo + p_c + c).max(1e-9);
        while s(hi) < 0.0 {
            hi *= 2.0;
            if hi > 1e15 {
                return None;
            }
        }
    }
    let brackets = scan_brackets(s, x_lo, hi, SCAN_POINTS, false);
    let &(a, b) = brackets.first()?;
    if a == b {
        return Some(a);
    }
    brent(s, a, b, 1e-15 * (1.0 + b.abs())).ok()
}

/// Optimal single-mode plan spending the whole battery (`b_end = 0`), from
/// the stationarity root and the duration balance
/// `x phi = min(b0 + (tau - phi) c, b_max)`.
///
/// While the capacity clips idle charging the balance uses `c = 0`; if that
/// root lies beyond the clipping point the optimum sits at the kink where
/// idle charging just fills the battery.
pub fn closed_form_duration(
    curve: &Curve,
    sup: &Supply,
    p_c: f64,
    tau: f64,
    b_max: f64,
    b0: f64,
) -> Result<ModePlan> {
    let c = sup.idle;
    if b0 + tau * c <= 0.0 {
        return Ok(ModePlan::idle());
    }
    let floor = supply_floor(sup, p_c);
    if floor > sup.d_max() {
        return Err(Error::NoFeasibleTransmission);
    }
    let x_lo = sup.drain(floor).max(0.0);
    let x_tau = (b0 / tau).min(sup.drain_max());
    let full = x_tau >= x_lo && mode_stationarity(curve, sup, p_c, c, x_tau) >= 0.0;
    let phi = if full {
        tau
    } else {
        let x = stationary_drain(curve, sup, p_c, c, x_lo).ok_or(Error::SolverDidNotConverge {
            iterations: SCAN_POINTS,
            residual: f64::NAN,
        })?;
        let mut phi = (b0 + tau * c) / (x + c);
        if c > 0.0 && b0 + (tau - phi) * c > b_max {
            let x0 = stationary_drain(curve, sup, p_c, 0.0, x_lo).unwrap_or(x);
            let phi_c = b_max / x0;
            let phi_cap = tau - (b_max - b0) / c;
            phi = phi_c.min(phi_cap);
        }
        phi.min(tau)
    };
    if phi <= 0.0 {
        return Ok(ModePlan::idle());
    }
    let y = (available(b0, sup, tau, b_max, phi) / phi).min(sup.drain_max());
    let d = sup.supply(y).max(floor);
    Ok(ModePlan {
        phi,
        supply: d,
        drain: sup.drain(d),
        value: phi * curve.value((d - p_c).max(0.0)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bat(r: f64) -> BatteryParams {
        BatteryParams::new(r, 1.5, f64::INFINITY, 0.0).unwrap()
    }

    #[test]
    fn drain_round_trip() {
        let b = bat(5.0);
        for &u in &[0.0, 0.05, 0.1] {
            let s = Supply::new(u, &b);
            for i in 0..50 {
                let d = s.d_min() + (s.d_max() - s.d_min()) * i as f64 / 50.0;
                let y = s.drain(d);
                assert!((s.supply(y) - d).abs() < 1e-12, "u={u} d={d}");
            }
        }
    }

    #[test]
    fn drain_is_convex() {
        let s = Supply::new(0.05, &bat(5.0));
        let n = 200;
        let pts: Vec<f64> = (0..=n)
            .map(|i| s.d_min() + (s.d_max() - s.d_min()) * 0.999 * i as f64 / n as f64)
            .collect();
        for w in pts.windows(3) {
            let mid = s.drain(w[1]);
            assert!(mid <= 0.5 * (s.drain(w[0]) + s.drain(w[2])) + 1e-15);
        }
    }

    #[test]
    fn curve_value_matches_slope_integral() {
        let c = Curve::new(vec![
            Piece { q: 0.5, s: 0.25, lo: 0.0, hi: 0.5 },
            Piece { q: 1.0, s: 1.0, lo: 0.5, hi: f64::INFINITY },
        ]);
        let p = 1.3;
        let n = 20000;
        let mut acc = 0.0;
        for i in 0..n {
            let x = (i as f64 + 0.5) * p / n as f64;
            acc += c.slope(x) * p / n as f64;
        }
        assert!((acc - c.value(p)).abs() < 1e-8);
    }

    #[test]
    fn priced_supply_is_stationary() {
        for &r in &[0.0, 5.0] {
            let b = bat(r);
            for &u in &[0.0, 0.05, 0.1] {
                let s = Supply::new(u, &b);
                let c = Curve::layer(0.7, 2000.0);
                for &lam in &[1.0, 10.0, 50.0, 300.0] {
                    let pr = price_mode(&c, &s, 0.01, lam).unwrap();
                    // brute-force check of the maximizer
                    let lo = supply_floor(&s, 0.01);
                    let hi = if s.d_max().is_finite() { s.d_max() } else { 2.0 };
                    let mut best = f64::NEG_INFINITY;
                    for i in 0..=400000 {
                        let d = lo + (hi - lo) * i as f64 / 400000.0;
                        best = best.max(c.value(d - 0.01) - lam * s.drain(d));
                    }
                    assert!(pr.value >= best - 1e-9, "r={r} u={u} lam={lam}");
                    assert!(pr.value <= best + 1e-6, "r={r} u={u} lam={lam} {pr:?} best={best}");
                }
            }
        }
    }

    #[test]
    fn duration_matches_brute_force() {
        let b = BatteryParams::new(5.0, 1.5, 0.03, 0.0).unwrap();
        let c = Curve::layer(1.0, 3000.0);
        for &(u, b0, bend) in &[(0.01, 0.005, 0.0), (0.0, 0.02, 0.0), (0.1, 0.0, 0.02), (0.05, 0.03, 0.01)] {
            let s = Supply::new(u, &b);
            let plan = optimize_duration(&c, &s, 0.01, 1.0, b.b_max, b0, bend).unwrap();
            let mut best: f64 = 0.0;
            for i in 1..=20000 {
                let phi = i as f64 / 20000.0;
                let y = (available(b0, &s, 1.0, b.b_max, phi) - bend) / phi;
                if y < s.drain(0.01) {
                    continue;
                }
                let d = s.supply(y.min(s.drain_max()));
                best = best.max(phi * c.value(d - 0.01));
            }
            assert!(plan.value >= best - 1e-12, "{u} {b0} {bend}");
            assert!(plan.value <= best + 1e-4 * best.max(1e-9));
        }
    }
}
