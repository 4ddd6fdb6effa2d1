use ehlc_core::model::rate;
use ehlc_core::{ChannelDist, FrameAlloc};

/// Constant-power stretch of a transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Burst {
    /// Radiated power (watt).
    pub power: f64,
    /// Duration (second).
    pub duration: f64,
}

/// Constant-power stretches of a frame.
pub fn bursts(frame: &FrameAlloc) -> Vec<Burst> {
    match frame {
        FrameAlloc::Ltm(f) => f
            .l
            .iter()
            .zip(&f.p)
            .filter(|(&l, _)| l > 0.0)
            .map(|(&duration, &power)| Burst { power, duration })
            .collect(),
        FrameAlloc::Lsc(f) if f.phi > 0.0 => vec![Burst {
            power: f.total_power(),
            duration: f.phi,
        }],
        FrameAlloc::Lsc(_) => Vec::new(),
    }
}

/// Rate per frame of a transmitter that knows the channel state and signals
/// at its capacity with the given power schedule, averaged over the frames.
/// `dist` holds the gains per watt.
pub fn with_csit_baseline(schedule: &[Vec<Burst>], dist: &ChannelDist) -> f64 {
    if schedule.is_empty() {
        return 0.0;
    }
    let total: f64 = schedule
        .iter()
        .flatten()
        .map(|b| {
            dist.h()
                .iter()
                .zip(dist.p())
                .map(|(&h, &p)| p * b.duration * rate(h * b.power))
                .sum::<f64>()
        })
        .sum();
    total / schedule.len() as f64
}
