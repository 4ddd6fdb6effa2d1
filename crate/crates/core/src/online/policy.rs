use std::collections::HashMap;
use std::sync::Mutex;

use crate::alloc::FrameAlloc;
use crate::error::{invalid, Error, Result};
use crate::model::HarvestProfile;
use crate::online::{OnlineState, PolicyTable};
use crate::system::System;
use crate::Strategy;

/// Largest number of memoized decisions per simulator.
const CACHE_LIMIT: usize = 200_000;

/// Spends the frame's energy within the frame; stays silent when the circuit
/// cannot be powered.
pub fn greedy_step(sys: &System, strategy: Strategy, state: OnlineState) -> Result<FrameAlloc> {
    let b = state.b.clamp(0.0, sys.b_max());
    silent_on_shortage(sys, strategy, state.u, b, strategy.solve_frame(sys, b, state.u))
}

fn silent_on_shortage(
    sys: &System,
    strategy: Strategy,
    u: f64,
    b: f64,
    res: Result<FrameAlloc>,
) -> Result<FrameAlloc> {
    match res {
        Err(Error::NoFeasibleTransmission) => strategy
            .plan_frame(sys, u, b, 0.0)
            .ok_or(Error::NoFeasibleTransmission),
        other => other,
    }
}

/// First frame of the two-frame optimum whose second frame harvests half
/// the mean harvest.
pub fn mv_step(sys: &System, strategy: Strategy, state: OnlineState, u_bar: f64) -> Result<FrameAlloc> {
    if !(u_bar >= 0.0 && u_bar.is_finite()) {
        return Err(invalid("u_bar", "mean harvest must be finite and >= 0"));
    }
    let b = state.b.clamp(0.0, sys.b_max());
    let two = sys.with_battery(sys.battery.with_initial(b));
    let profile = HarvestProfile::new(vec![state.u, 0.5 * u_bar])?;
    match strategy.solve_two_frame(&two, &profile) {
        Ok(mut frames) => Ok(frames.swap_remove(0)),
        Err(e) => silent_on_shortage(sys, strategy, state.u, b, Err(e)),
    }
}

/// Causal decision rule.
#[derive(Debug, Clone, Copy)]
pub enum Policy<'a> {
    Dp(&'a PolicyTable),
    Mv { u_bar: f64 },
    Greedy,
}

/// Per-frame record of a simulated run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    /// Expected rate of each frame.
    pub rates: Vec<f64>,
    /// Battery level at the end of each frame (joule).
    pub levels: Vec<f64>,
    pub frames: Vec<FrameAlloc>,
}

impl Trajectory {
    pub fn total_rate(&self) -> f64 {
        self.rates.iter().sum()
    }

    /// Rate averaged over the frames.
    pub fn average_rate(&self) -> f64 {
        if self.rates.is_empty() {
            0.0
        } else {
            self.total_rate() / self.rates.len() as f64
        }
    }
}

/// Runs a policy on harvest sequences, memoizing the decisions of the
/// stationary policies.
pub struct Simulator<'a> {
    sys: &'a System,
    strategy: Strategy,
    policy: Policy<'a>,
    cache: Mutex<HashMap<(u64, u64), FrameAlloc>>,
}

impl<'a> Simulator<'a> {
    pub fn new(sys: &'a System, strategy: Strategy, policy: Policy<'a>) -> Self {
        Self {
            sys,
            strategy,
            policy,
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// Decision in `state`.
    pub fn step(&self, state: OnlineState) -> Result<FrameAlloc> {
        let key = (state.u.to_bits(), state.b.to_bits());
        let compute = || match self.policy {
            Policy::Dp(t) => Ok(t.decide(state.k, state.u, state.b)),
            Policy::Mv { u_bar } => mv_step(self.sys, self.strategy, state, u_bar),
            Policy::Greedy => greedy_step(self.sys, self.strategy, state),
        };
        if matches!(self.policy, Policy::Dp(_)) {
            return compute();
        }
        if let Some(f) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(f.clone());
        }
        let f = compute()?;
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() < CACHE_LIMIT {
            cache.insert(key, f.clone());
        }
        Ok(f)
    }

    /// Applies the policy causally from `sys.battery.b_0`.
    pub fn run(&self, harvest: &[f64]) -> Result<Trajectory> {
        if let Policy::Dp(t) = self.policy {
            if harvest.len() > t.horizon() {
                return Err(invalid(
                    "K",
                    format!("{} frames exceed the policy horizon {}", harvest.len(), t.horizon()),
                ));
            }
        }
        let sys = self.sys;
        let b_max = sys.b_max();
        let mut b = sys.battery.b_0;
        let mut out = Trajectory::default();
        for (k, &u) in harvest.iter().enumerate() {
            let f = self.step(OnlineState { u, b, k })?;
            let next = f.end_battery(b, sys);
            let tol = 1e-9 * (1.0 + b + sys.tau() * u);
            assert!(
                next >= -tol && next <= b_max + tol,
                "battery level {next} left [0, {b_max}] in frame {k}"
            );
            out.rates.push(f.objective(sys));
            b = next.clamp(0.0, b_max);
            out.levels.push(b);
            out.frames.push(f);
        }
        Ok(out)
    }
}

/// Runs `policy` on one harvest sequence.
pub fn simulate(sys: &System, strategy: Strategy, policy: Policy<'_>, harvest: &[f64]) -> Result<Trajectory> {
    Simulator::new(sys, strategy, policy).run(harvest)
}
