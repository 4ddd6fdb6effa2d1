use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ehlc_cli::config::StrategyName;
use ehlc_cli::{load_config, oracle_check, run_experiment, write_csv, ExperimentConfig, Mode, Result};

#[derive(Parser)]
#[command(name = "ehlc", version, about = "Layered-coding schedules for energy-harvesting transmitters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Offline optimum (and with-CSIT baseline if configured) per sweep point.
    SolveOffline(Common),
    /// Causal policies per sweep point.
    SolveOnline(Common),
    /// Every configured mode per sweep point.
    Sweep(Common),
    /// Single-frame solver against the grid oracle.
    OracleCheck(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<StrategyName>,
}

fn parse_strategy(s: &str) -> std::result::Result<StrategyName, String> {
    s.parse::<ehlc_core::Strategy>().map(Into::into).map_err(|e| e.to_string())
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = load_config(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.harvest.seed = seed;
        }
        if let Some(s) = self.strategy {
            cfg.run.strategy = s;
        }
        Ok(cfg)
    }

    fn output(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(File::create(p)?),
            None => Box::new(io::stdout().lock()),
        })
    }
}

fn keep_modes(cfg: &mut ExperimentConfig, keep: impl Fn(Mode) -> bool, fallback: &[Mode]) {
    cfg.run.modes.retain(|&m| keep(m));
    if cfg.run.modes.is_empty() {
        cfg.run.modes = fallback.to_vec();
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SolveOffline(c) => {
            let mut cfg = c.load()?;
            keep_modes(&mut cfg, |m| !m.is_online(), &[Mode::Offline]);
            write_csv(&run_experiment(&cfg)?, c.output()?)
        }
        Command::SolveOnline(c) => {
            let mut cfg = c.load()?;
            keep_modes(&mut cfg, Mode::is_online, &[Mode::Dp, Mode::Mv, Mode::Greedy]);
            write_csv(&run_experiment(&cfg)?, c.output()?)
        }
        Command::Sweep(c) => {
            let cfg = c.load()?;
            write_csv(&run_experiment(&cfg)?, c.output()?)
        }
        Command::OracleCheck(c) => {
            let cfg = c.load()?;
            let rows = oracle_check(&cfg)?;
            let mut w = csv::Writer::from_writer(c.output()?);
            w.write_record(["strategy", "b0", "u", "solver", "oracle", "bound", "agrees"])?;
            for r in &rows {
                w.write_record([
                    r.strategy.to_string(),
                    r.b0.to_string(),
                    r.u.to_string(),
                    r.solver.to_string(),
                    r.oracle.to_string(),
                    r.bound.to_string(),
                    r.agrees().to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("EHLC_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("ehlc: cannot size the worker pool: {e}");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ehlc: {e}");
            ExitCode::FAILURE
        }
    }
}
