use crate::frame::{Curve, Piece};
use crate::model::{inv_rate, rate, ChannelDist};

/// Layers that receive power under superposition coding, with merged masses
/// and per-layer power caps.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveLayerSet {
    /// Surviving layer indices (0-based, ascending gain).
    pub indices: Vec<usize>,
    /// Merged probability masses.
    pub merged_p: Vec<f64>,
    /// Inverse gains of survivors followed by the sentinel `0`.
    pub s: Vec<f64>,
    /// Per-layer power caps; the lowest layer is uncapped.
    pub pmax: Vec<f64>,
}

impl ActiveLayerSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// `p~_l / (s_l - s_{l+1})` for each survivor.
    pub fn ratios(&self) -> Vec<f64> {
        ratios(&self.merged_p, &self.s)
    }

    /// Tail masses of the survivors.
    pub fn tails(&self) -> Vec<f64> {
        let mut q = vec![0.0; self.len()];
        let mut acc = 0.0;
        for l in (0..self.len()).rev() {
            acc += self.merged_p[l];
            q[l] = acc;
        }
        q
    }

    /// Rate per unit time of the water-filled frame as a function of total
    /// radiated power. The marginal rate while layer `a_l` fills is
    /// `q_{a_l} / (s_{a_l} + P)`.
    pub fn curve(&self) -> Curve {
        let q = self.tails();
        let mut pieces = Vec::with_capacity(self.len());
        let mut lo = 0.0;
        for l in (0..self.len()).rev() {
            let hi = if l == 0 { f64::INFINITY } else { lo + self.pmax[l] };
            pieces.push(Piece {
                q: q[l],
                s: self.s[l],
                lo,
                hi,
            });
            lo = hi;
        }
        Curve::new(pieces)
    }
}

fn ratios(p: &[f64], s: &[f64]) -> Vec<f64> {
    (0..p.len()).map(|l| p[l] / (s[l] - s[l + 1])).collect()
}

/// Merges layers until `p~_l / (s_l - s_{l+1})` strictly increases.
pub fn find_active_layers(dist: &ChannelDist) -> ActiveLayerSet {
    let mut idx: Vec<usize> = (0..dist.len()).collect();
    let mut mass: Vec<f64> = dist.p().to_vec();
    let sv = |idx: &[usize]| -> Vec<f64> {
        let mut s: Vec<f64> = idx.iter().map(|&i| dist.s()[i]).collect();
        s.push(0.0);
        s
    };
    loop {
        let s = sv(&idx);
        let r = ratios(&mass, &s);
        match (1..idx.len()).find(|&j| r[j] <= r[j - 1]) {
            Some(j) => {
                mass[j - 1] += mass[j];
                mass.remove(j);
                idx.remove(j);
            }
            None => break,
        }
    }
    let s = sv(&idx);
    let mut set = ActiveLayerSet {
        indices: idx,
        merged_p: mass,
        s,
        pmax: Vec::new(),
    };
    set.pmax = pmax_thresholds(&set);
    set
}

/// Container sizes of the layered water-filling.
pub fn pmax_thresholds(active: &ActiveLayerSet) -> Vec<f64> {
    let a = active.len();
    let p = &active.merged_p;
    let s = &active.s;
    let rho = |i: usize| p[i] * (s[i - 1] - s[i]) / (p[i - 1] * (s[i] - s[i + 1]));
    let mut caps = vec![f64::INFINITY; a];
    for l in 1..a {
        let mut acc = s[l] - s[l + 1];
        let mut log_prod = 0.0;
        for j in (l + 1)..a {
            log_prod += rho(j).ln();
            acc += (s[j] - s[j + 1]) * log_prod.exp();
        }
        caps[l] = (rho(l) - 1.0) * acc;
    }
    caps
}

/// Distributes `p_total` over the active layers, filling from the top.
/// Returns powers indexed by original layer.
pub fn layered_water_filling(p_total: f64, active: &ActiveLayerSet, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let mut left = p_total.max(0.0);
    for l in (0..active.len()).rev() {
        let take = if l == 0 { left } else { left.min(active.pmax[l]) };
        out[active.indices[l]] = take;
        left -= take;
        if left <= 0.0 {
            left = 0.0;
        }
    }
    out
}

/// Layer rates `R_i = phi G(h_i P_i / (1 + h_i sum_{j>i} P_j))`.
pub fn lsc_rates_from_powers(powers: &[f64], phi: f64, dist: &ChannelDist) -> Vec<f64> {
    let n = powers.len();
    let mut out = vec![0.0; n];
    let mut above = 0.0;
    for i in (0..n).rev() {
        let h = dist.h()[i];
        out[i] = if powers[i] > 0.0 {
            phi * rate(h * powers[i] / (1.0 + h * above))
        } else {
            0.0
        };
        above += powers[i];
    }
    out
}

/// Total power needed to support the given layer rates.
pub fn total_power_from_rates(rates: &[f64], phi: f64, dist: &ChannelDist) -> f64 {
    if phi <= 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut prod = 1.0;
    for (i, &r) in rates.iter().enumerate() {
        let g = inv_rate(r / phi);
        total += dist.s()[i] * g * prod;
        prod *= g + 1.0;
    }
    total
}
