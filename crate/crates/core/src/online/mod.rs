//! Causal policies: finite-horizon dynamic programming over a battery grid,
//! the mean-value two-frame heuristic and the greedy policy, plus a
//! trajectory simulator.

mod dp;
mod policy;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};

pub use dp::{battery_grid, dp_solve, dp_solve_stages, PolicyTable, RewardTable};
pub use policy::{greedy_step, mv_step, simulate, Policy, Simulator, Trajectory};

/// Decision state at the start of a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnlineState {
    /// Harvested power in this frame (watt).
    pub u: f64,
    /// Battery energy at the frame start (joule).
    pub b: f64,
    /// Frame index, from zero.
    pub k: usize,
}

/// Finite distribution of the harvested power.
#[derive(Debug, Clone, PartialEq)]
pub struct HarvestSupport {
    values: Vec<f64>,
    probs: Vec<f64>,
}

impl HarvestSupport {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(invalid("harvest", "values and probabilities must be non-empty and of equal length"));
        }
        if values.iter().any(|&u| !(u >= 0.0 && u.is_finite())) {
            return Err(invalid("harvest.values", "harvested powers must be finite and >= 0"));
        }
        if probs.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(invalid("harvest.probs", "probabilities must be finite and >= 0"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid("harvest.probs", format!("probabilities sum to {total}, expected 1")));
        }
        Ok(Self { values, probs })
    }

    /// Equally likely values.
    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        let n = values.len().max(1);
        Self::new(values, vec![1.0 / n as f64; n])
    }

    /// A single certain value.
    pub fn certain(u: f64) -> Result<Self> {
        Self::new(vec![u], vec![1.0])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().zip(&self.probs).map(|(u, p)| u * p).sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn index_of(&self, u: f64) -> Option<usize> {
        self.values.iter().position(|&x| x == u)
    }
}

/// `k` harvest draws for trial `trial` of a run seeded with `seed`; each
/// trial reads its own stream, so results do not depend on trial order.
pub fn sample_harvest(support: &HarvestSupport, k: usize, seed: u64, trial: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    let dist = WeightedIndex::new(&support.probs).expect("validated probabilities");
    (0..k).map(|_| support.values[dist.sample(&mut rng)]).collect()
}
