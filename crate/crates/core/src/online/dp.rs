use std::sync::Arc;

use rayon::prelude::*;

use crate::alloc::{FrameAlloc, LscFrame, LtmFrame};
use crate::error::{invalid, Result};
use crate::online::HarvestSupport;
use crate::system::System;
use crate::Strategy;

/// Frames of the largest harvest that bound the grid of an unbounded
/// battery.
const UNBOUNDED_CAP_FRAMES: f64 = 4.0;

/// Uniform battery grid on `[0, B_max]` with `points` levels; a single level
/// for a battery without capacity. An unbounded battery is cut at the
/// initial level plus a few frames of the largest harvest.
pub fn battery_grid(sys: &System, u_max: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(invalid("grid_size", "need at least 2 battery levels"));
    }
    let cap = if sys.b_max().is_finite() {
        sys.b_max()
    } else {
        sys.battery.b_0 + UNBOUNDED_CAP_FRAMES * sys.tau() * u_max
    };
    if cap <= 0.0 {
        return Ok(vec![0.0]);
    }
    let last = (points - 1) as f64;
    Ok((0..points)
        .map(|i| if i + 1 == points { cap } else { cap * i as f64 / last })
        .collect())
}

/// Best single-frame rate for every harvest value, start level and target
/// end level on a uniform battery grid.
#[derive(Debug, Clone)]
pub struct RewardTable {
    sys: System,
    strategy: Strategy,
    grid: Vec<f64>,
    u: Vec<f64>,
    value: Vec<f64>,
    end: Vec<f64>,
}

impl RewardTable {
    /// Plans every `(u, b, b')` triple; infeasible targets get `-inf`.
    pub fn build(sys: &System, strategy: Strategy, u: &[f64], grid: Vec<f64>) -> Self {
        let n = grid.len();
        let cells: Vec<(f64, f64)> = (0..u.len() * n * n)
            .into_par_iter()
            .map(|idx| {
                let (ui, rest) = (idx / (n * n), idx % (n * n));
                let (bi, bj) = (rest / n, rest % n);
                match strategy.plan_frame(sys, u[ui], grid[bi], grid[bj]) {
                    Some(f) => (f.objective(sys), f.end_battery(grid[bi], sys)),
                    None => (f64::NEG_INFINITY, f64::NAN),
                }
            })
            .collect();
        let (value, end) = cells.into_iter().unzip();
        Self {
            sys: sys.clone(),
            strategy,
            grid,
            u: u.to_vec(),
            value,
            end,
        }
    }

    pub fn system(&self) -> &System {
        &self.sys
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn harvest_values(&self) -> &[f64] {
        &self.u
    }

    fn cell(&self, ui: usize, bi: usize, bj: usize) -> usize {
        let n = self.grid.len();
        (ui * n + bi) * n + bj
    }

    /// Rate of the best frame from level `bi` to at least level `bj`.
    pub fn reward(&self, ui: usize, bi: usize, bj: usize) -> f64 {
        self.value[self.cell(ui, bi, bj)]
    }

    /// Battery level reached by that frame.
    pub fn end_level(&self, ui: usize, bi: usize, bj: usize) -> f64 {
        self.end[self.cell(ui, bi, bj)]
    }

    /// Linear interpolation of grid values at level `b`, held constant
    /// beyond the grid.
    pub fn interpolate(&self, values: &[f64], b: f64) -> f64 {
        let n = self.grid.len();
        if n == 1 || b <= 0.0 {
            return values[0];
        }
        let step = self.grid[1];
        let x = b / step;
        if x >= (n - 1) as f64 {
            return values[n - 1];
        }
        let i = x.floor() as usize;
        let t = x - i as f64;
        values[i] + t * (values[i + 1] - values[i])
    }

    /// Grid index of `b` when it sits on the grid.
    pub fn snap(&self, b: f64) -> Option<usize> {
        let n = self.grid.len();
        if n == 1 {
            return (b.abs() <= 1e-12).then_some(0);
        }
        let step = self.grid[1];
        let x = b / step;
        let i = x.round();
        ((x - i).abs() <= 1e-9 && i >= 0.0 && i <= (n - 1) as f64).then_some(i as usize)
    }

    fn zero_frame(&self, u: f64) -> FrameAlloc {
        let n = self.sys.layers();
        match self.strategy {
            Strategy::Ltm => FrameAlloc::Ltm(LtmFrame::zero(u, n)),
            Strategy::Lsc => FrameAlloc::Lsc(LscFrame::zero(u, n)),
        }
    }
}

/// Value function and decisions of a finite-horizon dynamic program.
///
/// The decision in each state is the target battery level at the frame end;
/// the frame itself is the best single-frame plan reaching that target.
#[derive(Debug, Clone)]
pub struct PolicyTable {
    rewards: Arc<RewardTable>,
    stages: Vec<Vec<f64>>,
    value: Vec<Vec<Vec<f64>>>,
    action: Vec<Vec<Vec<usize>>>,
    expected: Vec<Vec<f64>>,
}

/// Dynamic program over `k` frames with i.i.d. harvest and a battery grid
/// of `grid_size` levels.
pub fn dp_solve(
    sys: &System,
    strategy: Strategy,
    support: &HarvestSupport,
    k: usize,
    grid_size: usize,
) -> Result<PolicyTable> {
    let grid = battery_grid(sys, support.max(), grid_size)?;
    let rewards = Arc::new(RewardTable::build(sys, strategy, support.values(), grid));
    dp_solve_stages(rewards, &vec![support.clone(); k])
}

/// Dynamic program with a harvest distribution per frame, on a shared
/// reward table. Every stage value must appear in the table.
pub fn dp_solve_stages(rewards: Arc<RewardTable>, stages: &[HarvestSupport]) -> Result<PolicyTable> {
    let m = rewards.u.len();
    let probs = stages
        .iter()
        .map(|s| {
            let mut p = vec![0.0; m];
            for (&u, &q) in s.values().iter().zip(s.probs()) {
                let i = rewards
                    .u
                    .iter()
                    .position(|&x| x == u)
                    .ok_or_else(|| invalid("harvest.values", format!("{u} W is not in the reward table")))?;
                p[i] += q;
            }
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PolicyTable::solve(rewards, probs))
}

impl PolicyTable {
    fn solve(rewards: Arc<RewardTable>, stages: Vec<Vec<f64>>) -> Self {
        let k = stages.len();
        let n = rewards.grid.len();
        let m = rewards.u.len();
        let mut value = vec![vec![vec![f64::NAN; n]; m]; k];
        let mut action = vec![vec![vec![0usize; n]; m]; k];
        let mut expected = vec![vec![0.0; n]; k + 1];
        for s in (0..k).rev() {
            let next = &expected[s + 1];
            let rows: Vec<(usize, Vec<(f64, usize)>)> = (0..m)
                .filter(|&ui| stages[s][ui] > 0.0)
                .map(|ui| {
                    let row = (0..n)
                        .into_par_iter()
                        .map(|bi| {
                            let mut best = (f64::NEG_INFINITY, 0);
                            for bj in 0..n {
                                let r = rewards.reward(ui, bi, bj);
                                if r == f64::NEG_INFINITY {
                                    continue;
                                }
                                let end = rewards.end_level(ui, bi, bj);
                                let cont = match rewards.snap(end) {
                                    Some(j) => next[j],
                                    None => rewards.interpolate(next, end),
                                };
                                if r + cont > best.0 {
                                    best = (r + cont, bj);
                                }
                            }
                            best
                        })
                        .collect();
                    (ui, row)
                })
                .collect();
            let mut exp = vec![0.0; n];
            for (ui, row) in rows {
                for (bi, (v, a)) in row.into_iter().enumerate() {
                    value[s][ui][bi] = v;
                    action[s][ui][bi] = a;
                    exp[bi] += stages[s][ui] * v;
                }
            }
            expected[s] = exp;
        }
        Self {
            rewards,
            stages,
            value,
            action,
            expected,
        }
    }

    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    pub fn rewards(&self) -> &RewardTable {
        &self.rewards
    }

    pub fn battery_grid(&self) -> &[f64] {
        &self.rewards.grid
    }

    pub fn harvest_values(&self) -> &[f64] {
        &self.rewards.u
    }

    /// Optimal expected rate from frame `k` on, in state `(u, grid level)`;
    /// `NaN` for harvest values impossible in that frame.
    pub fn value(&self, k: usize, ui: usize, bi: usize) -> f64 {
        self.value[k][ui][bi]
    }

    /// Grid index of the target end level in that state.
    pub fn target(&self, k: usize, ui: usize, bi: usize) -> usize {
        self.action[k][ui][bi]
    }

    /// Expected optimal rate from frame `k` on at battery level `b`, before
    /// the harvest of frame `k` is known.
    pub fn expected_value(&self, k: usize, b: f64) -> f64 {
        self.rewards.interpolate(&self.expected[k], b)
    }

    /// Frame chosen in frame `k` with harvest `u` and battery level `b`.
    /// Off-grid states are decided by planning every grid target exactly.
    pub fn decide(&self, k: usize, u: f64, b: f64) -> FrameAlloc {
        let rw = &self.rewards;
        let sys = &rw.sys;
        let ui = rw.u.iter().position(|&x| x == u);
        if let (Some(ui), Some(bi)) = (ui, rw.snap(b)) {
            if self.value[k][ui][bi].is_finite() {
                if let Some(f) = rw.strategy.plan_frame(sys, u, b, rw.grid[self.action[k][ui][bi]]) {
                    return f;
                }
            }
        }
        let next = &self.expected[k + 1];
        let mut best: Option<(f64, FrameAlloc)> = None;
        for &target in &rw.grid {
            if let Some(f) = rw.strategy.plan_frame(sys, u, b, target) {
                let v = f.objective(sys) + rw.interpolate(next, f.end_battery(b, sys));
                if best.as_ref().map_or(true, |(bv, _)| v > *bv) {
                    best = Some((v, f));
                }
            }
        }
        best.map_or_else(|| rw.zero_frame(u), |t| t.1)
    }
}
