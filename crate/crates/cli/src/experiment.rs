use std::io::Write;
use std::sync::Arc;

use ehlc_core::online::{battery_grid, dp_solve_stages, sample_harvest, HarvestSupport, Policy, RewardTable, Simulator};
use ehlc_core::oracle::{grid_search_single_frame, GridSpec};
use ehlc_core::{FrameAlloc, HarvestProfile, Strategy, System};
use rayon::prelude::*;

use crate::baseline::{bursts, with_csit_baseline};
use crate::config::{ExperimentConfig, Instance, Mode, SweepVar};
use crate::error::Result;

/// Column names of the experiment CSV.
pub const CSV_HEADER: [&str; 10] = [
    "sweep_var",
    "sweep_value",
    "strategy",
    "mode",
    "avg_rate_nats",
    "avg_rate_bits",
    "stderr",
    "trials",
    "seed",
    "note",
];

/// Label of rows rated with the channel known at the transmitter.
pub const CSIT_NOTE: &str = "csit_baseline=same_schedule";

/// Evaluation budget of each oracle search run from the command line.
const ORACLE_BUDGET: u64 = 10_000_000;

/// One (sweep value, mode) result. Rates are nats per channel use.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub sweep_var: Option<SweepVar>,
    pub sweep_value: Option<f64>,
    pub strategy: Strategy,
    pub mode: Mode,
    pub avg_rate_nats: f64,
    pub stderr: f64,
    pub trials: usize,
    pub seed: u64,
    /// Solver error or baseline label; empty otherwise.
    pub note: String,
}

impl Row {
    pub fn avg_rate_bits(&self) -> f64 {
        self.avg_rate_nats / std::f64::consts::LN_2
    }

    pub fn is_error(&self) -> bool {
        self.note.starts_with("error")
    }

    fn fields(&self) -> [String; 10] {
        [
            self.sweep_var.map_or_else(|| "none".to_string(), |v| v.to_string()),
            self.sweep_value.map_or_else(String::new, |v| v.to_string()),
            self.strategy.to_string(),
            self.mode.to_string(),
            self.avg_rate_nats.to_string(),
            self.avg_rate_bits().to_string(),
            self.stderr.to_string(),
            self.trials.to_string(),
            self.seed.to_string(),
            self.note.clone(),
        ]
    }
}

pub fn write_csv<W: Write>(rows: &[Row], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs every mode at every sweep point, in sweep order then mode order.
/// Solver failures are reported in the row's note.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<Row>> {
    cfg.validate()?;
    let points: Vec<Option<(SweepVar, f64)>> = match &cfg.run.sweep {
        Some(s) => s.values.iter().map(|&v| Some((s.var, v))).collect(),
        None => vec![None],
    };
    let mut rows = Vec::new();
    for point in points {
        let inst = cfg.instance(point)?;
        rows.extend(run_point(cfg, &inst, point));
    }
    Ok(rows)
}

/// Harvest sequences shared by every mode of a run.
pub fn harvest_sequences(support: &HarvestSupport, k: usize, trials: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..trials as u64).map(|t| sample_harvest(support, k, seed, t)).collect()
}

fn run_point(cfg: &ExperimentConfig, inst: &Instance, point: Option<(SweepVar, f64)>) -> Vec<Row> {
    let h = &cfg.harvest;
    let strategy = cfg.strategy();
    let runner = PointRunner::new(&inst.sys, strategy, &inst.support, h.k, cfg.run.grid_size);
    let seqs = harvest_sequences(&inst.support, h.k, h.trials, h.seed);
    let mut offline: Option<std::result::Result<Vec<Vec<FrameAlloc>>, String>> = None;
    cfg.run
        .modes
        .iter()
        .map(|&mode| {
            let row = |rates: std::result::Result<Vec<f64>, String>| {
                let (avg, stderr, note) = match rates {
                    Ok(r) => {
                        let (m, s) = mean_stderr(&r);
                        let note = if mode == Mode::Csit { CSIT_NOTE.to_string() } else { String::new() };
                        (m, s, note)
                    }
                    Err(e) => (f64::NAN, f64::NAN, format!("error: {e}")),
                };
                Row {
                    sweep_var: point.map(|p| p.0),
                    sweep_value: point.map(|p| p.1),
                    strategy,
                    mode,
                    avg_rate_nats: avg,
                    stderr,
                    trials: h.trials,
                    seed: h.seed,
                    note,
                }
            };
            match mode {
                Mode::Offline | Mode::Csit => {
                    let frames = offline.get_or_insert_with(|| runner.offline_all(&seqs));
                    row(frames.clone().map(|all| runner.rates(&all, mode)))
                }
                _ => row(runner.online(mode, &seqs)),
            }
        })
        .collect()
}

/// Shared state of the runs at one sweep point.
pub struct PointRunner<'a> {
    sys: &'a System,
    strategy: Strategy,
    support: &'a HarvestSupport,
    k: usize,
    grid_size: usize,
    table: std::sync::OnceLock<std::result::Result<Arc<RewardTable>, String>>,
}

impl<'a> PointRunner<'a> {
    pub fn new(sys: &'a System, strategy: Strategy, support: &'a HarvestSupport, k: usize, grid_size: usize) -> Self {
        Self {
            sys,
            strategy,
            support,
            k,
            grid_size,
            table: std::sync::OnceLock::new(),
        }
    }

    fn rewards(&self) -> std::result::Result<Arc<RewardTable>, String> {
        self.table
            .get_or_init(|| {
                let grid = battery_grid(self.sys, self.support.max(), self.grid_size).map_err(|e| e.to_string())?;
                Ok(Arc::new(RewardTable::build(self.sys, self.strategy, self.support.values(), grid)))
            })
            .clone()
    }

    /// Per-frame rate of a trial in nats per channel use.
    fn per_use(&self, total: f64) -> f64 {
        total / (self.k as f64 * self.sys.tau())
    }

    /// Offline schedule of one harvest sequence. A bounded battery is
    /// scheduled by dynamic programming with the sequence known.
    pub fn offline(&self, u: &[f64]) -> std::result::Result<Vec<FrameAlloc>, String> {
        if self.sys.b_max().is_infinite() {
            let profile = HarvestProfile::new(u.to_vec()).map_err(|e| e.to_string())?;
            return self.strategy.solve_multiframe(self.sys, &profile).map_err(|e| e.to_string());
        }
        let stages = u
            .iter()
            .map(|&x| HarvestSupport::certain(x))
            .collect::<ehlc_core::Result<Vec<_>>>()
            .map_err(|e| e.to_string())?;
        let table = dp_solve_stages(self.rewards()?, &stages).map_err(|e| e.to_string())?;
        let sim = Simulator::new(self.sys, self.strategy, Policy::Dp(&table));
        Ok(sim.run(u).map_err(|e| e.to_string())?.frames)
    }

    fn offline_all(&self, seqs: &[Vec<f64>]) -> std::result::Result<Vec<Vec<FrameAlloc>>, String> {
        seqs.par_iter().map(|u| self.offline(u)).collect()
    }

    fn rates(&self, all: &[Vec<FrameAlloc>], mode: Mode) -> Vec<f64> {
        all.iter()
            .map(|frames| {
                let total = match mode {
                    Mode::Csit => {
                        let sched: Vec<_> = frames.iter().map(bursts).collect();
                        with_csit_baseline(&sched, self.sys.channel()) * frames.len() as f64
                    }
                    _ => frames.iter().map(|f| f.objective(self.sys)).sum(),
                };
                self.per_use(total)
            })
            .collect()
    }

    /// Per-trial rates of a causal policy.
    pub fn online(&self, mode: Mode, seqs: &[Vec<f64>]) -> std::result::Result<Vec<f64>, String> {
        let table;
        let policy = match mode {
            Mode::Dp => {
                let stages = vec![self.support.clone(); self.k];
                table = dp_solve_stages(self.rewards()?, &stages).map_err(|e| e.to_string())?;
                Policy::Dp(&table)
            }
            Mode::Mv => Policy::Mv {
                u_bar: self.support.mean(),
            },
            Mode::Greedy => Policy::Greedy,
            Mode::Offline | Mode::Csit => unreachable!("offline modes are not causal"),
        };
        let sim = Simulator::new(self.sys, self.strategy, policy);
        seqs.par_iter()
            .map(|u| {
                sim.run(u)
                    .map(|t| self.per_use(t.total_rate()))
                    .map_err(|e| e.to_string())
            })
            .collect()
    }
}

/// Solver objective against the grid oracle at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub strategy: Strategy,
    pub b0: f64,
    pub u: f64,
    pub solver: f64,
    pub oracle: f64,
    pub bound: f64,
}

impl OracleRow {
    /// Solver within the oracle's bound below and no more than `1e-9` above.
    pub fn agrees(&self) -> bool {
        self.solver >= self.oracle - self.bound && self.solver <= self.oracle + 1e-9
    }
}

/// Checks the single-frame solver of the configured strategy against the
/// grid oracle at every harvest value and three battery levels.
pub fn oracle_check(cfg: &ExperimentConfig) -> Result<Vec<OracleRow>> {
    let inst = cfg.instance(None)?;
    let sys = &inst.sys;
    let strategy = cfg.strategy();
    let n = sys.layers() as u32;
    let points = match strategy {
        Strategy::Lsc => (ORACLE_BUDGET as f64).powf(1.0 / n as f64).floor() as usize,
        Strategy::Ltm => 40,
    }
    .clamp(2, 40);
    let grid = GridSpec::new(points, ORACLE_BUDGET, true)?;
    let cap = sys.b_max().min(sys.tau() * inst.support.max());
    let mut out = Vec::new();
    for &u in inst.support.values() {
        for b0 in [0.0, 0.5 * cap, cap] {
            let solver = strategy.solve_frame(sys, b0, u)?.objective(sys);
            let o = grid_search_single_frame(sys, strategy, b0, u, grid)?;
            out.push(OracleRow {
                strategy,
                b0,
                u,
                solver,
                oracle: o.objective,
                bound: o.bound,
            });
        }
    }
    Ok(out)
}
