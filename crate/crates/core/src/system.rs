use crate::error::Result;
use crate::frame::{Curve, Supply};
use crate::lsc::{find_active_layers, ActiveLayerSet};
use crate::model::{BatteryParams, ChannelDist, FrameConfig};

/// A transmitter: frame parameters, battery and the channel seen through the
/// link budget.
///
/// `channel()` holds effective gains (SNR per watt), i.e. the physical gains
/// multiplied by `1 / (n0 * bandwidth)`. Rates computed against it are in
/// nats per channel use; multiply by the bandwidth for nat/s.
#[derive(Debug, Clone)]
pub struct System {
    pub frame: FrameConfig,
    pub battery: BatteryParams,
    physical: ChannelDist,
    channel: ChannelDist,
    active: ActiveLayerSet,
    lsc_curve: Curve,
    layer_curves: Vec<Curve>,
}

impl System {
    pub fn new(frame: FrameConfig, battery: BatteryParams, physical: ChannelDist) -> Result<Self> {
        let channel = physical.scaled(frame.snr_per_watt())?;
        let active = find_active_layers(&channel);
        let lsc_curve = active.curve();
        let layer_curves = channel
            .q()
            .iter()
            .zip(channel.h())
            .map(|(&q, &h)| Curve::layer(q, h))
            .collect();
        Ok(Self {
            frame,
            battery,
            physical,
            channel,
            active,
            lsc_curve,
            layer_curves,
        })
    }

    /// Same system with different battery parameters.
    pub fn with_battery(&self, battery: BatteryParams) -> Self {
        Self {
            battery,
            ..self.clone()
        }
    }

    /// Effective channel (gains in SNR per watt).
    pub fn channel(&self) -> &ChannelDist {
        &self.channel
    }

    /// Channel as configured, before link-budget scaling.
    pub fn physical_channel(&self) -> &ChannelDist {
        &self.physical
    }

    pub fn layers(&self) -> usize {
        self.channel.len()
    }

    pub fn tau(&self) -> f64 {
        self.frame.tau
    }

    pub fn p_c(&self) -> f64 {
        self.frame.p_c
    }

    pub fn b_max(&self) -> f64 {
        self.battery.b_max
    }

    pub fn active(&self) -> &ActiveLayerSet {
        &self.active
    }

    /// Water-filled rate curve of the superposition strategy.
    pub fn lsc_curve(&self) -> &Curve {
        &self.lsc_curve
    }

    /// Rate curve `q_i ln(1 + h_i P)` of partition `i`.
    pub fn layer_curve(&self, i: usize) -> &Curve {
        &self.layer_curves[i]
    }

    pub fn supply(&self, u: f64) -> Supply {
        Supply::new(u, &self.battery)
    }

    /// Converts a per-frame objective (nats per channel use, summed over the
    /// frame) to nat/s.
    pub fn to_nats_per_second(&self, objective: f64) -> f64 {
        objective * self.frame.bandwidth / self.frame.tau
    }
}
