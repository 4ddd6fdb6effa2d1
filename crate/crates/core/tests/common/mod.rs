#![allow(dead_code)]

use ehlc_core::model::quantize_gamma_channel;
use ehlc_core::{BatteryParams, ChannelDist, FrameConfig, System};
use rand::Rng;

pub const V_B: f64 = 1.5;

/// Link budget of the reference setup: 1 MHz, 1 nW/Hz.
pub fn frame(p_c: f64) -> FrameConfig {
    FrameConfig::new(1.0, p_c, 1e6, 1e-9).unwrap()
}

/// Unit-SNR-per-watt frame.
pub fn unit_frame(p_c: f64) -> FrameConfig {
    FrameConfig::normalized(1.0, p_c).unwrap()
}

pub fn battery(r: f64, b_max: f64) -> BatteryParams {
    BatteryParams::new(r, V_B, b_max, 0.0).unwrap()
}

pub fn gamma5() -> ChannelDist {
    quantize_gamma_channel(1.0, 1.0, 5.0, 5).unwrap()
}

/// Reference system: exponential gain quantized to five levels.
pub fn reference(r: f64, b_max: f64, p_c: f64) -> System {
    System::new(frame(p_c), battery(r, b_max), gamma5()).unwrap()
}

pub fn h14() -> ChannelDist {
    ChannelDist::new(vec![1.0, 4.0], vec![0.5, 0.5]).unwrap()
}

pub fn ideal_unit(dist: ChannelDist) -> System {
    System::new(unit_frame(0.0), BatteryParams::ideal(f64::INFINITY, 0.0).unwrap(), dist).unwrap()
}

/// Random distribution with `n` gains in `[lo, hi]` and random weights.
pub fn random_dist<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> ChannelDist {
    loop {
        let mut h: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
        h.sort_by(f64::total_cmp);
        if h.windows(2).any(|w| w[1] - w[0] < 1e-3 * hi) {
            continue;
        }
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = w.iter().sum();
        return ChannelDist::new(h, w.iter().map(|x| x / total).collect()).unwrap();
    }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}
