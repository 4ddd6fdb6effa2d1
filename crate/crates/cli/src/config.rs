use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ehlc_core::model::quantize_gamma_channel;
use ehlc_core::online::HarvestSupport;
use ehlc_core::{BatteryParams, FrameConfig, Strategy, System};
use serde::Deserialize;

use crate::error::{config_invalid, in_section, Result};

/// Battery levels of the dynamic-programming grid unless configured.
pub const DEFAULT_GRID_SIZE: usize = 201;

/// Gamma power gain quantized to evenly spaced levels.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub shape: f64,
    /// Rate of the gain density `y^x h^(x-1) e^(-y h) / Gamma(x)`.
    pub rate: f64,
    pub truncation: f64,
    pub levels: usize,
    /// Rescales the quantized gains to unit mean.
    #[serde(default)]
    pub unit_mean: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryConfig {
    /// Internal resistance (ohm).
    pub r: f64,
    /// Nominal voltage (volt).
    pub v_b: f64,
    /// Capacity (joule); `inf` for an unbounded battery.
    #[serde(default = "unbounded")]
    pub b_max: f64,
    /// Initial charge (joule).
    #[serde(default)]
    pub b_0: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSection {
    /// Frame length (second).
    pub tau: f64,
    /// Circuit power (watt).
    pub p_c: f64,
    /// Bandwidth (hertz).
    pub bandwidth: f64,
    /// Noise spectral density (watt per hertz).
    pub n0: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarvestConfig {
    /// Harvested powers (watt).
    pub values: Vec<f64>,
    /// Probabilities of `values`; uniform when absent.
    #[serde(default)]
    pub probs: Option<Vec<f64>>,
    /// Frames per trial.
    #[serde(rename = "K", alias = "k")]
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyName {
    Ltm,
    Lsc,
}

impl From<StrategyName> for Strategy {
    fn from(s: StrategyName) -> Self {
        match s {
            StrategyName::Ltm => Strategy::Ltm,
            StrategyName::Lsc => Strategy::Lsc,
        }
    }
}

impl From<Strategy> for StrategyName {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::Ltm => StrategyName::Ltm,
            Strategy::Lsc => StrategyName::Lsc,
        }
    }
}

/// How a row's schedule is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Non-causal optimum with the whole harvest sequence known.
    Offline,
    /// Stochastic dynamic programming policy.
    Dp,
    /// Mean-value two-frame policy.
    Mv,
    /// Spend each frame's energy within the frame.
    Greedy,
    /// Offline schedule rated as if the channel were known at the transmitter.
    Csit,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::Offline, Mode::Dp, Mode::Mv, Mode::Greedy, Mode::Csit];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Offline => "offline",
            Self::Dp => "dp",
            Self::Mv => "mv",
            Self::Greedy => "greedy",
            Self::Csit => "csit",
        }
    }

    pub fn is_online(self) -> bool {
        matches!(self, Self::Dp | Self::Mv | Self::Greedy)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = crate::error::CliError;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| config_invalid("run.modes", format!("unknown mode `{s}`")))
    }
}

/// Parameter varied across the rows of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    R,
    VB,
    BMax,
    B0,
    PC,
    Tau,
    Shape,
    Rate,
    /// Shape `x` with rate `x` and quantized gains rescaled to unit mean.
    ShapeUnitMean,
}

impl SweepVar {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::R => "r",
            Self::VB => "v_b",
            Self::BMax => "b_max",
            Self::B0 => "b_0",
            Self::PC => "p_c",
            Self::Tau => "tau",
            Self::Shape => "shape",
            Self::Rate => "rate",
            Self::ShapeUnitMean => "shape_unit_mean",
        }
    }

    fn field(self) -> &'static str {
        match self {
            Self::R => "battery.r",
            Self::VB => "battery.v_b",
            Self::BMax => "battery.b_max",
            Self::B0 => "battery.b_0",
            Self::PC => "frame.p_c",
            Self::Tau => "frame.tau",
            Self::Shape | Self::ShapeUnitMean => "channel.shape",
            Self::Rate => "channel.rate",
        }
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub var: SweepVar,
    #[serde(default)]
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub strategy: StrategyName,
    pub modes: Vec<Mode>,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
}

/// Complete description of an experiment.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub channel: ChannelConfig,
    pub battery: BatteryConfig,
    pub frame: FrameSection,
    pub harvest: HarvestConfig,
    pub run: RunConfig,
}

/// System and harvest law of one sweep point.
#[derive(Debug, Clone)]
pub struct Instance {
    pub sys: System,
    pub support: HarvestSupport,
}

fn unbounded() -> f64 {
    f64::INFINITY
}

/// Largest channel quantization accepted from a config.
pub const MAX_LEVELS: usize = 1000;

/// Largest battery grid accepted from a config.
pub const MAX_GRID_SIZE: usize = 100_000;

fn default_grid_size() -> usize {
    DEFAULT_GRID_SIZE
}

/// Parses and validates a TOML experiment description.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

impl ExperimentConfig {
    pub fn strategy(&self) -> Strategy {
        self.run.strategy.into()
    }

    /// Checks every field, including the instance of every sweep value.
    pub fn validate(&self) -> Result<()> {
        let h = &self.harvest;
        if h.k == 0 {
            return Err(config_invalid("harvest.K", "need at least one frame"));
        }
        if h.trials == 0 {
            return Err(config_invalid("harvest.trials", "need at least one trial"));
        }
        if self.run.modes.is_empty() {
            return Err(config_invalid("run.modes", "need at least one mode"));
        }
        if self.run.grid_size < 2 {
            return Err(config_invalid("run.grid_size", "need at least 2 battery levels"));
        }
        if self.run.grid_size > MAX_GRID_SIZE {
            return Err(config_invalid("run.grid_size", format!("at most {MAX_GRID_SIZE} battery levels")));
        }
        if self.channel.levels > MAX_LEVELS {
            return Err(config_invalid("channel.levels", format!("at most {MAX_LEVELS} levels")));
        }
        match &self.run.sweep {
            Some(s) if !s.values.is_empty() => {
                for &v in &s.values {
                    self.instance(Some((s.var, v)))?;
                }
                Ok(())
            }
            _ => self.instance(None).map(|_| ()),
        }
    }

    /// Copy with one parameter replaced.
    pub fn with_value(&self, var: SweepVar, value: f64) -> Result<Self> {
        if value.is_nan() {
            return Err(config_invalid(var.field(), "sweep value is NaN"));
        }
        let mut c = self.clone();
        match var {
            SweepVar::R => c.battery.r = value,
            SweepVar::VB => c.battery.v_b = value,
            SweepVar::BMax => c.battery.b_max = value,
            SweepVar::B0 => c.battery.b_0 = value,
            SweepVar::PC => c.frame.p_c = value,
            SweepVar::Tau => c.frame.tau = value,
            SweepVar::Shape => c.channel.shape = value,
            SweepVar::Rate => c.channel.rate = value,
            SweepVar::ShapeUnitMean => {
                c.channel.shape = value;
                c.channel.rate = value;
                c.channel.unit_mean = true;
            }
        }
        Ok(c)
    }

    /// Builds the system and harvest law, optionally at one sweep point.
    pub fn instance(&self, point: Option<(SweepVar, f64)>) -> Result<Instance> {
        let c = match point {
            Some((var, v)) => self.with_value(var, v)?,
            None => self.clone(),
        };
        let ch = &c.channel;
        let mut dist =
            quantize_gamma_channel(ch.shape, ch.rate, ch.truncation, ch.levels).map_err(|e| in_section("channel", e))?;
        if ch.unit_mean {
            let mean: f64 = dist.h().iter().zip(dist.p()).map(|(h, p)| h * p).sum();
            dist = dist.scaled(1.0 / mean).map_err(|e| in_section("channel", e))?;
        }
        let b = &c.battery;
        let battery = BatteryParams::new(b.r, b.v_b, b.b_max, b.b_0).map_err(|e| in_section("battery", e))?;
        let f = &c.frame;
        let frame = FrameConfig::new(f.tau, f.p_c, f.bandwidth, f.n0).map_err(|e| in_section("frame", e))?;
        let sys = System::new(frame, battery, dist).map_err(|e| in_section("battery", e))?;
        let h = &c.harvest;
        let support = match &h.probs {
            Some(p) => HarvestSupport::new(h.values.clone(), p.clone()),
            None => HarvestSupport::uniform(h.values.clone()),
        }
        .map_err(|e| in_section("harvest", e))?;
        Ok(Instance { sys, support })
    }
}
