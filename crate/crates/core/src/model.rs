//! Physical and statistical substrate: battery losses, channel states, frame
//! parameters and the rate function.

use crate::error::{invalid, Error, Result};

/// Battery with a series internal resistance.
///
/// Charging at power `V` accumulates `F_c(V) = V - r V^2 / v_b^2`; draining at
/// `d` delivers `F_d(d) = d - r d^2 / v_b^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryParams {
    /// Internal resistance (ohm).
    pub r: f64,
    /// Nominal voltage (volt).
    pub v_b: f64,
    /// Capacity (joule); may be `f64::INFINITY`.
    pub b_max: f64,
    /// Initial stored energy (joule).
    pub b_0: f64,
}

impl BatteryParams {
    pub fn new(r: f64, v_b: f64, b_max: f64, b_0: f64) -> Result<Self> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(invalid("r", format!("must be finite and >= 0, got {r}")));
        }
        if !(v_b > 0.0 && v_b.is_finite()) {
            return Err(invalid("v_b", format!("must be finite and > 0, got {v_b}")));
        }
        if !(b_max >= 0.0) {
            return Err(invalid("b_max", format!("must be >= 0, got {b_max}")));
        }
        if !(b_0 >= 0.0 && b_0 <= b_max && b_0.is_finite()) {
            return Err(invalid("b_0", format!("must lie in [0, b_max], got {b_0}")));
        }
        Ok(Self { r, v_b, b_max, b_0 })
    }

    /// Lossless battery of the given capacity.
    pub fn ideal(b_max: f64, b_0: f64) -> Result<Self> {
        Self::new(0.0, 1.0, b_max, b_0)
    }

    pub fn with_initial(mut self, b_0: f64) -> Self {
        self.b_0 = b_0;
        self
    }

    pub fn is_ideal(&self) -> bool {
        self.r == 0.0
    }

    /// `r / v_b^2`.
    #[inline]
    pub fn loss(&self) -> f64 {
        self.r / (self.v_b * self.v_b)
    }

    /// Input power at which `F_c` and `F_d` peak, `v_b^2 / (2r)`.
    #[inline]
    pub fn peak(&self) -> f64 {
        if self.r == 0.0 {
            f64::INFINITY
        } else {
            0.5 / self.loss()
        }
    }

    /// Largest power the battery can deliver, `v_b^2 / (4r)`.
    #[inline]
    pub fn max_delivery(&self) -> f64 {
        if self.r == 0.0 {
            f64::INFINITY
        } else {
            0.25 / self.loss()
        }
    }

    #[inline]
    pub fn f_c(&self, v: f64) -> f64 {
        v - self.loss() * v * v
    }

    #[inline]
    pub fn f_c_slope(&self, v: f64) -> f64 {
        1.0 - 2.0 * self.loss() * v
    }

    #[inline]
    pub fn f_d(&self, d: f64) -> f64 {
        d - self.loss() * d * d
    }

    #[inline]
    pub fn f_d_slope(&self, d: f64) -> f64 {
        1.0 - 2.0 * self.loss() * d
    }

    /// Smaller root of `F(x) = y` for the shared quadratic; `y` is clamped to
    /// the attainable range.
    #[inline]
    pub fn f_inverse(&self, y: f64) -> f64 {
        let k = self.loss();
        if k == 0.0 {
            return y;
        }
        let disc = (1.0 - 4.0 * k * y).max(0.0);
        2.0 * y / (1.0 + disc.sqrt())
    }

    /// Best uniform charging power from harvest `u` while idle.
    #[inline]
    pub fn idle_charge_power(&self, u: f64) -> f64 {
        u.min(self.peak())
    }

    /// Energy accumulation rate while idle, `F_c(V_a*)`.
    #[inline]
    pub fn idle_charge(&self, u: f64) -> f64 {
        self.f_c(self.idle_charge_power(u))
    }
}

/// Accumulation rate `F_c(v)` for charging power `v`.
pub fn charge_rate(v: f64, bat: &BatteryParams) -> f64 {
    bat.f_c(v)
}

/// Delivered power `F_d(d)` for drain rate `d`.
pub fn discharge_delivered(d: f64, bat: &BatteryParams) -> Result<f64> {
    let peak = bat.peak();
    if d > peak * (1.0 + 1e-12) {
        return Err(Error::DrainBeyondPeak { drain: d, peak });
    }
    Ok(bat.f_d(d))
}

/// Smallest drain rate delivering `p_del`.
pub fn invert_discharge(p_del: f64, bat: &BatteryParams) -> Result<f64> {
    let max = bat.max_delivery();
    if p_del > max * (1.0 + 1e-12) {
        return Err(Error::InfeasibleDelivery { power: p_del, max });
    }
    Ok(bat.f_inverse(p_del.min(max)))
}

/// Optimal idle charging power `V_a*`.
pub fn idle_charge_rate(u: f64, bat: &BatteryParams) -> f64 {
    bat.idle_charge_power(u)
}

/// `ln(1 + snr)` in nats.
#[inline]
pub fn rate(snr: f64) -> f64 {
    snr.ln_1p()
}

/// Inverse of [`rate`].
#[inline]
pub fn inv_rate(rr: f64) -> f64 {
    rr.exp_m1()
}

/// Discrete channel: gain `h[i]` occurs with probability `p[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDist {
    h: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
    s: Vec<f64>,
}

impl ChannelDist {
    pub fn new(h: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if h.is_empty() {
            return Err(invalid("h", "at least one channel state is required"));
        }
        if h.len() != p.len() {
            return Err(invalid(
                "p",
                format!("length {} does not match {} gains", p.len(), h.len()),
            ));
        }
        if h.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(invalid("h", "gains must be finite and positive"));
        }
        if h.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("h", "gains must be strictly increasing"));
        }
        if p.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(invalid("p", "probabilities must be non-negative"));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(invalid("p", format!("probabilities sum to {total}")));
        }
        let p: Vec<f64> = p.iter().map(|x| x / total).collect();
        let n = h.len();
        let mut q = vec![0.0; n];
        let mut acc = 0.0;
        for i in (0..n).rev() {
            acc += p[i];
            q[i] = acc;
        }
        q[0] = 1.0;
        let mut s: Vec<f64> = h.iter().map(|x| 1.0 / x).collect();
        s.push(0.0);
        Ok(Self { h, p, q, s })
    }

    /// Single deterministic state.
    pub fn single(h: f64) -> Result<Self> {
        Self::new(vec![h], vec![1.0])
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    /// Tail probabilities `q[i] = sum_{j >= i} p[j]`.
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// Inverse gains with the trailing sentinel `0`; length `N + 1`.
    pub fn s(&self) -> &[f64] {
        &self.s
    }

    /// Same probabilities with every gain multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.h.iter().map(|x| x * factor).collect(), self.p.clone())
    }
}

/// Frame timing, circuit power and link parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameConfig {
    /// Frame length (second).
    pub tau: f64,
    /// Circuit power while transmitting (watt).
    pub p_c: f64,
    /// Bandwidth (hertz).
    pub bandwidth: f64,
    /// Noise spectral density (watt per hertz).
    pub n0: f64,
}

impl FrameConfig {
    pub fn new(tau: f64, p_c: f64, bandwidth: f64, n0: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(invalid("tau", format!("must be positive, got {tau}")));
        }
        if !(p_c >= 0.0 && p_c.is_finite()) {
            return Err(invalid("p_c", format!("must be >= 0, got {p_c}")));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(invalid("bandwidth", format!("must be positive, got {bandwidth}")));
        }
        if !(n0 > 0.0 && n0.is_finite()) {
            return Err(invalid("n0", format!("must be positive, got {n0}")));
        }
        Ok(Self {
            tau,
            p_c,
            bandwidth,
            n0,
        })
    }

    /// Normalized frame: unit bandwidth and noise, so gains are SNR per watt.
    pub fn normalized(tau: f64, p_c: f64) -> Result<Self> {
        Self::new(tau, p_c, 1.0, 1.0)
    }

    /// Received SNR per watt of transmit power per unit channel gain.
    pub fn snr_per_watt(&self) -> f64 {
        1.0 / (self.n0 * self.bandwidth)
    }
}

/// Harvested power per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct HarvestProfile {
    pub u: Vec<f64>,
}

impl HarvestProfile {
    pub fn new(u: Vec<f64>) -> Result<Self> {
        if u.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(invalid("u", "harvested powers must be finite and >= 0"));
        }
        Ok(Self { u })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// Quantizes a Gamma(shape, rate) power gain to `n` evenly spaced levels
/// `h_i = i T / n`. Level `i` receives the mass of `((i-1)T/n, iT/n]`; the top
/// level also absorbs the tail above `(n-1)T/n`.
pub fn quantize_gamma_channel(shape: f64, rate: f64, t: f64, n: usize) -> Result<ChannelDist> {
    if !(shape > 0.0 && shape.is_finite()) {
        return Err(invalid("shape", format!("must be positive, got {shape}")));
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(invalid("rate", format!("must be positive, got {rate}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("truncation", format!("must be positive, got {t}")));
    }
    if n == 0 {
        return Err(invalid("levels", "must be >= 1"));
    }
    let cdf = |x: f64| statrs::function::gamma::gamma_lr(shape, rate * x);
    let h: Vec<f64> = (1..=n).map(|i| i as f64 * t / n as f64).collect();
    let mut p = Vec::with_capacity(n);
    let mut prev = 0.0;
    for i in 1..n {
        let c = cdf(h[i - 1]);
        p.push((c - prev).max(0.0));
        prev = c;
    }
    p.push((1.0 - prev).max(0.0));
    ChannelDist::new(h, p)
}
