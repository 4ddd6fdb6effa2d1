use crate::alloc::{FrameAlloc, LscFrame, LtmFrame};
use crate::error::{invalid, Error, Result};
use crate::lsc::lsc_rates_from_powers;
use crate::model::{rate, BatteryParams, HarvestProfile};
use crate::system::System;
use crate::Strategy;

/// Exhaustive search settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Points per search dimension.
    pub points: usize,
    /// Largest number of grid evaluations allowed.
    pub budget: u64,
    /// Refine the best grid point by a bounded compass search.
    pub polish: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            points: 40,
            budget: 100_000_000,
            polish: true,
        }
    }
}

impl GridSpec {
    pub fn new(points: usize, budget: u64, polish: bool) -> Result<Self> {
        if points < 2 {
            return Err(invalid("points", "need at least 2 points per dimension"));
        }
        Ok(Self { points, budget, polish })
    }
}

/// Best allocation found and the grid's modulus of continuity: the largest
/// objective jump between neighbouring grid points, summed over dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub objective: f64,
    pub bound: f64,
    pub frames: Vec<FrameAlloc>,
    pub evaluations: u64,
}

/// Frame physics written out from the battery model.
struct Phys<'a> {
    sys: &'a System,
    bat: BatteryParams,
    u: f64,
    c: f64,
    peak: f64,
    floor_drain: f64,
}

impl<'a> Phys<'a> {
    fn new(sys: &'a System, u: f64) -> Self {
        let bat = sys.battery;
        let c = bat.f_c(bat.idle_charge_power(u));
        let peak = bat.peak();
        let floor = sys.p_c().max(u - peak).max(0.0);
        let floor_drain = if floor >= u {
            if floor - u > bat.max_delivery() {
                f64::INFINITY
            } else {
                bat.f_inverse(floor - u)
            }
        } else {
            -bat.f_c(u - floor)
        };
        Self {
            sys,
            bat,
            u,
            c,
            peak,
            floor_drain,
        }
    }

    /// Supply at drain `y` (negative when charging).
    fn supply(&self, y: f64) -> Option<f64> {
        if y >= 0.0 {
            (y <= self.peak * (1.0 + 1e-15)).then(|| self.u + self.bat.f_d(y.min(self.peak)))
        } else {
            if -y > self.bat.max_delivery() {
                return None;
            }
            let v = self.bat.f_inverse(-y);
            (v <= self.u).then(|| self.u - v)
        }
    }

    fn available(&self, b: f64, phi: f64) -> f64 {
        (b + (self.sys.tau() - phi) * self.c).min(self.sys.b_max())
    }

    fn split(&self, y: f64, len: f64) -> (f64, f64) {
        if y >= 0.0 {
            (len, y * len)
        } else if self.u > 0.0 {
            (len * (1.0 - self.bat.f_inverse(-y) / self.u), 0.0)
        } else {
            (len, 0.0)
        }
    }
}

/// Search problem over the unit box.
trait Problem {
    fn dims(&self) -> usize;
    fn value(&self, z: &[f64]) -> Option<f64>;
}

struct Searched {
    z: Vec<f64>,
    value: f64,
    bound: f64,
    evaluations: u64,
}

fn search<P: Problem>(p: &P, grid: GridSpec) -> Option<Searched> {
    let d = p.dims();
    let n = grid.points;
    let total = n.pow(d as u32);
    let mut vals = vec![f64::NAN; total];
    let mut best: Option<(usize, f64)> = None;
    let mut z = vec![0.0; d];
    for (idx, slot) in vals.iter_mut().enumerate() {
        let mut r = idx;
        for zk in z.iter_mut() {
            *zk = (r % n) as f64 / (n - 1) as f64;
            r /= n;
        }
        if let Some(v) = p.value(&z) {
            *slot = v;
            if best.map_or(true, |(_, bv)| v > bv) {
                best = Some((idx, v));
            }
        }
    }
    best?;
    let mut bound: f64 = 0.0;
    let mut stride = 1;
    for _ in 0..d {
        let mut jump: f64 = 0.0;
        for idx in 0..total {
            if (idx / stride) % n + 1 < n {
                let (a, b) = (vals[idx], vals[idx + stride]);
                if a.is_finite() && b.is_finite() {
                    jump = jump.max((a - b).abs());
                }
            }
        }
        bound += jump;
        stride *= n;
    }
    let point = |idx: usize| {
        let mut zb = vec![0.0; d];
        let mut r = idx;
        for zk in zb.iter_mut() {
            *zk = (r % n) as f64 / (n - 1) as f64;
            r /= n;
        }
        zb
    };
    let peak = |idx: usize| {
        let v = vals[idx];
        let mut stride = 1;
        for _ in 0..d {
            let c = (idx / stride) % n;
            if (c > 0 && vals[idx - stride] > v) || (c + 1 < n && vals[idx + stride] > v) {
                return false;
            }
            stride *= n;
        }
        true
    };
    let mut order: Vec<usize> = (0..total).filter(|&i| vals[i].is_finite() && peak(i)).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let starts = if grid.polish { POLISH_STARTS } else { 1 };
    let mut chosen: Vec<usize> = Vec::new();
    for idx in order {
        if chosen.len() == starts {
            break;
        }
        let v = vals[idx];
        if chosen.iter().all(|&c| (vals[c] - v).abs() > 1e-14 * v.abs()) {
            chosen.push(idx);
        }
    }
    let mut evaluations = total as u64;
    let mut out: Option<Searched> = None;
    for idx in chosen {
        let mut s = Searched {
            z: point(idx),
            value: vals[idx],
            bound,
            evaluations: 0,
        };
        if grid.polish {
            polish(p, &mut s, 1.0 / (n - 1) as f64);
        }
        evaluations += s.evaluations;
        if out.as_ref().map_or(true, |o| s.value > o.value) {
            out = Some(s);
        }
    }
    out.map(|mut s| {
        s.evaluations = evaluations;
        s
    })
}

/// Number of distinct grid local maxima refined by the compass search.
const POLISH_STARTS: usize = 8;

/// Sweeps allowed per compass search.
const POLISH_ROUNDS: usize = 20_000;

/// Compass search with step doubling on success and halving on failure inside the unit box, over coordinate
/// and pairwise diagonal directions.
fn polish<P: Problem>(p: &P, s: &mut Searched, start: f64) {
    let d = p.dims();
    let mut dirs: Vec<Vec<(usize, f64)>> = Vec::new();
    for k in 0..d {
        for a in [1.0, -1.0] {
            dirs.push(vec![(k, a)]);
            for m in (k + 1)..d {
                for b in [1.0, -1.0] {
                    dirs.push(vec![(k, a), (m, b)]);
                }
            }
        }
    }
    let mut step = start;
    let mut trial = s.z.clone();
    let mut rounds = 0;
    while step > 1e-13 && rounds < POLISH_ROUNDS {
        rounds += 1;
        let mut improved = false;
        for dir in &dirs {
            trial.copy_from_slice(&s.z);
            for &(k, a) in dir {
                trial[k] = (trial[k] + a * step).clamp(0.0, 1.0);
            }
            s.evaluations += 1;
            if let Some(v) = p.value(&trial) {
                if v > s.value {
                    s.value = v;
                    s.z.copy_from_slice(&trial);
                    improved = true;
                }
            }
        }
        if improved {
            step = (2.0 * step).min(start);
        } else {
            step *= 0.5;
        }
    }
}

/// Superposition frame: duration and a stick-breaking split of the power
/// from the top layer down.
struct LscProblem<'a> {
    ph: Phys<'a>,
    b: f64,
    b_end: f64,
}

impl LscProblem<'_> {
    fn build(&self, z: &[f64]) -> Option<(f64, LscFrame)> {
        let sys = self.ph.sys;
        let n = sys.layers();
        let tau = sys.tau();
        let phi = z[0] * tau;
        if phi <= 0.0 {
            return (self.ph.available(self.b, 0.0) >= self.b_end - 1e-15).then(|| (0.0, LscFrame::zero(self.ph.u, n)));
        }
        let y = ((self.ph.available(self.b, phi) - self.b_end) / phi).min(self.ph.peak);
        if y < self.ph.floor_drain {
            return None;
        }
        let d = self.ph.supply(y)?;
        let p = d - sys.p_c();
        if p < 0.0 {
            return None;
        }
        let mut powers = vec![0.0; n];
        let mut left = p;
        for (k, i) in (0..n).rev().enumerate() {
            let w = if i == 0 { 1.0 } else { z[1 + k] };
            powers[i] = left * w;
            left -= powers[i];
        }
        let rates = lsc_rates_from_powers(&powers, phi, sys.channel());
        let value = rates.iter().zip(sys.channel().q()).map(|(r, q)| r * q).sum();
        let (beta, e) = self.ph.split(y, phi);
        Some((
            value,
            LscFrame {
                u: self.ph.u,
                powers,
                rates,
                beta,
                e,
                phi,
            },
        ))
    }
}

impl Problem for LscProblem<'_> {
    fn dims(&self) -> usize {
        self.ph.sys.layers()
    }

    fn value(&self, z: &[f64]) -> Option<f64> {
        self.build(z).map(|t| t.0)
    }
}

/// Map of the unit interval onto itself with a finer resolution near both
/// ends, where short partitions live.
fn stretch(z: f64) -> f64 {
    0.5 * (1.0 - (std::f64::consts::PI * z).cos())
}

/// Time-multiplexed frame with partitions for layers `i` and `j`:
/// duration, share of the first partition, and its drain within the
/// feasible range.
struct LtmProblem<'a> {
    ph: Phys<'a>,
    b: f64,
    b_end: f64,
    i: usize,
    j: Option<usize>,
}

impl LtmProblem<'_> {
    fn build(&self, z: &[f64]) -> Option<(f64, LtmFrame)> {
        let sys = self.ph.sys;
        let ch = sys.channel();
        let tau = sys.tau();
        let phi = z[0] * tau;
        let theta = if self.j.is_some() { stretch(z[2]) } else { 1.0 };
        let li = theta * phi;
        let lj = phi - li;
        let avail = self.ph.available(self.b, phi);
        let mut f = LtmFrame::zero(self.ph.u, sys.layers());
        f.phi = phi;
        let mut level = avail;
        let mut value = 0.0;
        let part = |f: &mut LtmFrame, m: usize, len: f64, y: f64| -> Option<f64> {
            let d = self.ph.supply(y)?;
            let p = d - sys.p_c();
            if p < -1e-15 {
                return None;
            }
            let (beta, e) = self.ph.split(y, len);
            f.l[m] = len;
            f.beta[m] = beta;
            f.e[m] = e;
            f.p[m] = p.max(0.0);
            Some(ch.q()[m] * len * rate(ch.h()[m] * p.max(0.0)))
        };
        if li > 0.0 {
            let last = self.j.is_none() || lj <= 0.0;
            let lo = self.ph.floor_drain.max((avail - sys.b_max()) / li);
            let top = if last { avail - self.b_end } else { avail };
            let hi = self.ph.peak.min(top / li);
            if lo > hi {
                return None;
            }
            let w = if self.j.is_some() { stretch(z[1]) } else { z[1] };
            let y = lo + w * (hi - lo);
            value += part(&mut f, self.i, li, y)?;
            level -= li * y;
        }
        if let Some(j) = self.j {
            if lj > 0.0 {
                let y = ((level - self.b_end) / lj).min(self.ph.peak);
                if y < self.ph.floor_drain {
                    return None;
                }
                value += part(&mut f, j, lj, y)?;
                level -= lj * y;
            }
        }
        (level >= self.b_end - 1e-12 * (1.0 + self.b_end)).then_some((value, f))
    }
}

impl Problem for LtmProblem<'_> {
    fn dims(&self) -> usize {
        if self.j.is_some() {
            3
        } else {
            2
        }
    }

    fn value(&self, z: &[f64]) -> Option<f64> {
        self.build(z).map(|t| t.0)
    }
}

fn frame_oracle(sys: &System, strategy: Strategy, b: f64, u: f64, b_end: f64, grid: GridSpec) -> Result<OracleResult> {
    let n = sys.layers();
    let pts = grid.points as u64;
    let requested = match strategy {
        Strategy::Lsc => pts.saturating_pow(n as u32),
        Strategy::Ltm => (n as u64) * pts * pts + (n * n.saturating_sub(1) / 2) as u64 * pts.pow(3),
    };
    if requested > grid.budget {
        return Err(Error::BudgetExceeded {
            requested,
            budget: grid.budget,
        });
    }
    let zero = |u: f64| match strategy {
        Strategy::Ltm => FrameAlloc::Ltm(LtmFrame::zero(u, n)),
        Strategy::Lsc => FrameAlloc::Lsc(LscFrame::zero(u, n)),
    };
    let mut best = OracleResult {
        objective: 0.0,
        bound: 0.0,
        frames: vec![zero(u)],
        evaluations: 0,
    };
    let mut bound: f64 = 0.0;
    let mut evals = 0;
    match strategy {
        Strategy::Lsc => {
            let p = LscProblem {
                ph: Phys::new(sys, u),
                b,
                b_end,
            };
            if let Some(s) = search(&p, grid) {
                evals += s.evaluations;
                bound = s.bound;
                if s.value > best.objective {
                    let (v, f) = p.build(&s.z).expect("searched point is feasible");
                    best.objective = v;
                    best.frames = vec![FrameAlloc::Lsc(f)];
                }
            }
        }
        Strategy::Ltm => {
            let mut groups: Vec<(usize, Option<usize>)> = (0..n).map(|i| (i, None)).collect();
            for i in 0..n {
                for j in (i + 1)..n {
                    groups.push((i, Some(j)));
                }
            }
            for (i, j) in groups {
                let p = LtmProblem {
                    ph: Phys::new(sys, u),
                    b,
                    b_end,
                    i,
                    j,
                };
                if let Some(s) = search(&p, grid) {
                    evals += s.evaluations;
                    bound = bound.max(s.bound);
                    if s.value > best.objective {
                        let (v, f) = p.build(&s.z).expect("searched point is feasible");
                        best.objective = v;
                        best.frames = vec![FrameAlloc::Ltm(f)];
                    }
                }
            }
        }
    }
    best.bound = bound;
    best.evaluations = evals;
    Ok(best)
}

/// Best single-frame allocation spending the battery, by exhaustive search
/// with optional local refinement.
pub fn grid_search_single_frame(
    sys: &System,
    strategy: Strategy,
    b0: f64,
    u: f64,
    grid: GridSpec,
) -> Result<OracleResult> {
    frame_oracle(sys, strategy, b0, u, 0.0, grid)
}

/// Best two-frame allocation: a scan over the energy carried into the second
/// frame, each side solved by the single-frame search.
pub fn grid_search_two_frame(
    sys: &System,
    strategy: Strategy,
    profile: &HarvestProfile,
    grid: GridSpec,
) -> Result<OracleResult> {
    if profile.len() != 2 {
        return Err(invalid("u", format!("two frames expected, got {}", profile.len())));
    }
    let (u1, u2) = (profile.u[0], profile.u[1]);
    let b0 = sys.battery.b_0;
    let outer = grid.points.min(50);
    let inner = GridSpec {
        points: (grid.points / 2).max(8),
        ..grid
    };
    let c1 = sys.battery.f_c(sys.battery.idle_charge_power(u1));
    let hi = (b0 + sys.tau() * c1).min(sys.b_max()).max(0.0);
    let eval = |b1: f64| -> Result<(f64, f64, u64, Vec<FrameAlloc>)> {
        let a = frame_oracle(sys, strategy, b0, u1, b1, inner)?;
        let c = frame_oracle(sys, strategy, b1, u2, 0.0, inner)?;
        let mut frames = a.frames;
        frames.extend(c.frames);
        Ok((a.objective + c.objective, a.bound + c.bound, a.evaluations + c.evaluations, frames))
    };
    let per = {
        let n = sys.layers() as u64;
        let p = inner.points as u64;
        match strategy {
            Strategy::Lsc => p.saturating_pow(n as u32),
            Strategy::Ltm => n * p * p + n * n.saturating_sub(1) / 2 * p.pow(3),
        }
    };
    let requested = per.saturating_mul(2 * outer as u64 + 120);
    if requested > grid.budget {
        return Err(Error::BudgetExceeded {
            requested,
            budget: grid.budget,
        });
    }
    let pts: Vec<f64> = if hi > 0.0 {
        (0..outer).map(|k| hi * k as f64 / (outer - 1) as f64).collect()
    } else {
        vec![0.0]
    };
    let mut evals = 0;
    let mut vals = Vec::with_capacity(pts.len());
    let mut best: Option<(f64, f64, Vec<FrameAlloc>)> = None;
    let mut inner_bound: f64 = 0.0;
    for &b1 in &pts {
        let (v, bnd, e, frames) = eval(b1)?;
        evals += e;
        inner_bound = inner_bound.max(bnd);
        vals.push(v);
        if best.as_ref().map_or(true, |b| v > b.0) {
            best = Some((v, b1, frames));
        }
    }
    let jump = vals.windows(2).map(|w| (w[0] - w[1]).abs()).fold(0.0, f64::max);
    let (mut bv, bb1, mut bframes) = best.expect("at least one carry level");
    if grid.polish && pts.len() > 1 {
        let step = hi / (outer - 1) as f64;
        let (mut a, mut c) = ((bb1 - step).max(0.0), (bb1 + step).min(hi));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..30 {
            let x1 = c - g * (c - a);
            let x2 = a + g * (c - a);
            let r1 = eval(x1)?;
            let r2 = eval(x2)?;
            evals += r1.2 + r2.2;
            if r1.0 > bv {
                bv = r1.0;
                bframes = r1.3.clone();
            }
            if r2.0 > bv {
                bv = r2.0;
                bframes = r2.3.clone();
            }
            if r1.0 >= r2.0 {
                c = x2;
            } else {
                a = x1;
            }
        }
    }
    Ok(OracleResult {
        objective: bv,
        bound: inner_bound + jump,
        frames: bframes,
        evaluations: evals,
    })
}
