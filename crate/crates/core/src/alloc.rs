//! Allocation containers for both strategies and the battery bookkeeping
//! they share.

use crate::frame::Supply;
use crate::lsc::lsc_rates_from_powers;
use crate::model::rate;
use crate::system::System;

/// One transmission segment inside a frame: harvest fraction routed to the
/// radio over `len` seconds (`beta = alpha * len`) and battery energy drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub len: f64,
    pub beta: f64,
    pub e: f64,
}

impl Segment {
    /// Net battery change over the segment.
    pub fn delta(&self, sup: &Supply, bat: &crate::model::BatteryParams) -> f64 {
        if self.len <= 0.0 {
            return -self.e;
        }
        let v = (1.0 - self.beta / self.len).max(0.0) * sup.u;
        self.len * bat.f_c(v) - self.e
    }

    /// Power available to the radio after the circuit.
    pub fn power(&self, sup: &Supply, bat: &crate::model::BatteryParams, p_c: f64) -> f64 {
        if self.len <= 0.0 {
            return 0.0;
        }
        self.beta * sup.u / self.len + bat.f_d(self.e / self.len) - p_c
    }
}

/// Battery level after the idle phase of a frame.
pub fn after_idle(b: f64, idle_len: f64, sup: &Supply, b_max: f64) -> f64 {
    (b + idle_len.max(0.0) * sup.idle).min(b_max.max(b))
}

/// Time-multiplexed allocation of one frame. Vectors are indexed by layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LtmFrame {
    pub u: f64,
    pub l: Vec<f64>,
    pub beta: Vec<f64>,
    pub e: Vec<f64>,
    /// Radiated power in each partition.
    pub p: Vec<f64>,
    pub phi: f64,
}

impl LtmFrame {
    pub fn zero(u: f64, n: usize) -> Self {
        Self {
            u,
            l: vec![0.0; n],
            beta: vec![0.0; n],
            e: vec![0.0; n],
            p: vec![0.0; n],
            phi: 0.0,
        }
    }

    /// Builds a frame from `(layer, length, supply)` triples.
    pub fn from_modes(sys: &System, u: f64, modes: &[(usize, f64, f64)]) -> Self {
        let sup = sys.supply(u);
        let mut f = Self::zero(u, sys.layers());
        for &(i, len, d) in modes {
            if len <= 0.0 {
                continue;
            }
            let (alpha, x) = sup.split(d);
            f.l[i] += len;
            f.beta[i] += alpha * len;
            f.e[i] += x * len;
            f.p[i] = (d - sys.p_c()).max(0.0);
        }
        f.phi = f.l.iter().sum::<f64>().min(sys.tau());
        f
    }

    pub fn segments(&self) -> Vec<Segment> {
        (0..self.l.len())
            .map(|i| Segment {
                len: self.l[i],
                beta: self.beta[i],
                e: self.e[i],
            })
            .collect()
    }

    /// Average rate `sum_i q_i l_i G(h_i P_i)`.
    pub fn objective(&self, sys: &System) -> f64 {
        let ch = sys.channel();
        (0..self.l.len())
            .map(|i| ch.q()[i] * self.l[i] * rate(ch.h()[i] * self.p[i].max(0.0)))
            .sum()
    }

    pub fn end_battery(&self, b: f64, sys: &System) -> f64 {
        let sup = sys.supply(self.u);
        let mut level = after_idle(b, sys.tau() - self.phi, &sup, sys.b_max());
        for s in self.segments() {
            level += s.delta(&sup, &sys.battery);
        }
        level
    }
}

/// Superposition-coded allocation of one frame. Vectors are indexed by layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LscFrame {
    pub u: f64,
    pub powers: Vec<f64>,
    pub rates: Vec<f64>,
    pub beta: f64,
    pub e: f64,
    pub phi: f64,
}

impl LscFrame {
    pub fn zero(u: f64, n: usize) -> Self {
        Self {
            u,
            powers: vec![0.0; n],
            rates: vec![0.0; n],
            beta: 0.0,
            e: 0.0,
            phi: 0.0,
        }
    }

    /// Water-fills the power left from supply `d` over `phi` seconds.
    pub fn from_mode(sys: &System, u: f64, phi: f64, d: f64) -> Self {
        if phi <= 0.0 {
            return Self::zero(u, sys.layers());
        }
        let sup = sys.supply(u);
        let (alpha, x) = sup.split(d);
        let p = (d - sys.p_c()).max(0.0);
        let powers = crate::lsc::layered_water_filling(p, sys.active(), sys.layers());
        let rates = lsc_rates_from_powers(&powers, phi, sys.channel());
        Self {
            u,
            powers,
            rates,
            beta: alpha * phi,
            e: x * phi,
            phi,
        }
    }

    pub fn segment(&self) -> Segment {
        Segment {
            len: self.phi,
            beta: self.beta,
            e: self.e,
        }
    }

    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }

    /// Average rate `sum_i q_i R_i`.
    pub fn objective(&self, sys: &System) -> f64 {
        self.rates.iter().zip(sys.channel().q()).map(|(r, q)| r * q).sum()
    }

    pub fn end_battery(&self, b: f64, sys: &System) -> f64 {
        let sup = sys.supply(self.u);
        after_idle(b, sys.tau() - self.phi, &sup, sys.b_max()) + self.segment().delta(&sup, &sys.battery)
    }
}

/// Multi-frame time-multiplexed allocation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LtmAllocation {
    pub frames: Vec<LtmFrame>,
}

impl LtmAllocation {
    pub fn objective(&self, sys: &System) -> f64 {
        self.frames.iter().map(|f| f.objective(sys)).sum()
    }
}

/// Average rate of frame `k` of an allocation.
pub fn ltm_average_rate(alloc: &LtmAllocation, sys: &System, k: usize) -> f64 {
    alloc.frames[k].objective(sys)
}

/// Multi-frame superposition-coded allocation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LscAllocation {
    pub frames: Vec<LscFrame>,
}

impl LscAllocation {
    pub fn objective(&self, sys: &System) -> f64 {
        self.frames.iter().map(|f| f.objective(sys)).sum()
    }
}

/// Either strategy's frame.
#[derive(Debug, Clone, PartialEq)]
pub enum FrameAlloc {
    Ltm(LtmFrame),
    Lsc(LscFrame),
}

impl FrameAlloc {
    pub fn objective(&self, sys: &System) -> f64 {
        match self {
            Self::Ltm(f) => f.objective(sys),
            Self::Lsc(f) => f.objective(sys),
        }
    }

    pub fn end_battery(&self, b: f64, sys: &System) -> f64 {
        match self {
            Self::Ltm(f) => f.end_battery(b, sys),
            Self::Lsc(f) => f.end_battery(b, sys),
        }
    }

    pub fn phi(&self) -> f64 {
        match self {
            Self::Ltm(f) => f.phi,
            Self::Lsc(f) => f.phi,
        }
    }

    pub fn u(&self) -> f64 {
        match self {
            Self::Ltm(f) => f.u,
            Self::Lsc(f) => f.u,
        }
    }

    /// Transmit power averaged over the transmission time.
    pub fn mean_power(&self) -> f64 {
        match self {
            Self::Ltm(f) => {
                if f.phi <= 0.0 {
                    0.0
                } else {
                    f.l.iter().zip(&f.p).map(|(l, p)| l * p).sum::<f64>() / f.phi
                }
            }
            Self::Lsc(f) => f.total_power(),
        }
    }
}
