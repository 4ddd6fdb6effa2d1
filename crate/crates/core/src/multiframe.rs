//! Energy split across frames for an unbounded battery.
//!
//! Each frame's best rate is concave in the net energy it draws from the
//! battery, so the split is a directional water-filling: a price on stored
//! energy that can only fall over time, and only where the battery runs
//! empty. Prices come from the per-frame pricing problem
//! `max over modes of [rate - price * drain]`, with idling as the mode that
//! stores `F_c(V_a*)` per second.

use std::collections::HashMap;

use crate::frame::{price_mode, Supply};
use crate::system::System;
use crate::Strategy;

/// Net battery drain of one frame at `lambda`, choosing the best mode.
pub fn frame_demand(sys: &System, strategy: Strategy, sup: &Supply, lambda: f64) -> f64 {
    let mut best_v = lambda * sup.idle;
    let mut best_d = -sup.idle;
    let mut consider = |curve: &crate::frame::Curve| {
        if let Some(pr) = price_mode(curve, sup, sys.p_c(), lambda) {
            if pr.value > best_v {
                best_v = pr.value;
                best_d = pr.drain;
            }
        }
    };
    match strategy {
        Strategy::Lsc => consider(sys.lsc_curve()),
        Strategy::Ltm => {
            for i in 0..sys.layers() {
                consider(sys.layer_curve(i));
            }
        }
    }
    sys.tau() * best_d
}

/// Per-frame value of stored energy in one price segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceSegment {
    pub start: usize,
    pub end: usize,
    pub lambda: f64,
}

/// End-of-frame battery levels and the price segments that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySplit {
    pub levels: Vec<f64>,
    pub segments: Vec<PriceSegment>,
}

struct Demands<'a> {
    sys: &'a System,
    strategy: Strategy,
    keys: Vec<usize>,
    supplies: Vec<Supply>,
}

impl<'a> Demands<'a> {
    fn new(sys: &'a System, strategy: Strategy, u: &[f64]) -> Self {
        let mut index: HashMap<u64, usize> = HashMap::new();
        let mut supplies = Vec::new();
        let keys = u
            .iter()
            .map(|&x| {
                *index.entry(x.to_bits()).or_insert_with(|| {
                    supplies.push(sys.supply(x));
                    supplies.len() - 1
                })
            })
            .collect();
        Self {
            sys,
            strategy,
            keys,
            supplies,
        }
    }

    fn at(&self, lambda: f64) -> Vec<f64> {
        self.supplies
            .iter()
            .map(|s| frame_demand(self.sys, self.strategy, s, lambda))
            .collect()
    }
}

/// Splits the harvest and initial energy across frames optimally for an
/// unbounded battery.
pub fn split_energy(sys: &System, strategy: Strategy, u: &[f64], b0: f64) -> EnergySplit {
    let k_total = u.len();
    let dem = Demands::new(sys, strategy, u);
    let mut levels = vec![0.0; k_total];
    let mut segments = Vec::new();
    let mut start = 0;
    let mut b = b0;
    while start < k_total {
        let frames = &dem.keys[start..];
        let max_prefix = |d: &[f64]| {
            let mut acc = 0.0;
            let mut worst = f64::NEG_INFINITY;
            for &k in frames {
                acc += d[k];
                worst = worst.max(acc);
            }
            worst
        };
        let scale = 1e-12 * (1.0 + b.abs());
        let fits = |lambda: f64| max_prefix(&dem.at(lambda)) <= b + scale;

        let mut hi = 1.0;
        while !fits(hi) {
            hi *= 4.0;
            if hi > 1e30 {
                break;
            }
        }
        let mut lo = hi;
        let floor = hi * 1e-14;
        while fits(lo) && lo > floor {
            lo *= 0.25;
        }
        let lambda = if fits(lo) {
            0.0
        } else {
            let (mut a, mut c) = (lo.ln(), hi.ln());
            for _ in 0..90 {
                let m = 0.5 * (a + c);
                if fits(m.exp()) {
                    c = m;
                } else {
                    a = m;
                }
            }
            c.exp()
        };

        let (d_lo, d_hi) = if lambda == 0.0 {
            let d = dem.at(floor);
            (d.clone(), d)
        } else {
            (dem.at(lambda * (1.0 + 1e-9)), dem.at(lambda * (1.0 - 1e-9)))
        };
        let lo_v: Vec<f64> = frames.iter().map(|&k| d_lo[k]).collect();
        let hi_v: Vec<f64> = frames.iter().map(|&k| d_hi[k].max(d_lo[k])).collect();

        // Last frame at which the battery can be exactly emptied.
        let n = frames.len();
        let mut end = n - 1;
        if lambda > 0.0 {
            let mut acc = 0.0;
            for j in 0..n {
                acc += hi_v[j];
                if acc >= b - scale {
                    end = j;
                }
            }
        }
        let target = if lambda > 0.0 {
            b
        } else {
            lo_v[..=end].iter().sum::<f64>()
        };

        // Fill from the back so earlier prefixes stay within the budget.
        let mut take = lo_v[..=end].to_vec();
        let mut prefix: Vec<f64> = take
            .iter()
            .scan(0.0, |acc, &x| {
                *acc += x;
                Some(*acc)
            })
            .collect();
        let mut missing = target - prefix[end];
        for j in (0..=end).rev() {
            if missing <= 0.0 {
                break;
            }
            let room = prefix[j..end]
                .iter()
                .map(|&p| b - p)
                .fold(missing, f64::min);
            let add = (hi_v[j] - lo_v[j]).min(room).max(0.0);
            take[j] += add;
            for p in &mut prefix[j..=end] {
                *p += add;
            }
            missing -= add;
        }

        let mut level = b;
        for j in 0..=end {
            level -= take[j];
            levels[start + j] = level.max(0.0);
        }
        if lambda > 0.0 {
            levels[start + end] = 0.0;
        }
        segments.push(PriceSegment {
            start,
            end: start + end,
            lambda,
        });
        b = levels[start + end];
        start += end + 1;
    }
    EnergySplit { levels, segments }
}
