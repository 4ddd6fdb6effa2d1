//! Configuration-driven experiments for layered-coding transmission
//! schedules: offline and causal policies over Monte Carlo harvest
//! sequences, with CSV output.

pub mod baseline;
pub mod config;
pub mod error;
pub mod experiment;

pub use baseline::{bursts, with_csit_baseline, Burst};
pub use config::{load_config, parse_config, ExperimentConfig, Instance, Mode, SweepVar};
pub use error::{CliError, Result};
pub use experiment::{
    harvest_sequences, mean_stderr, oracle_check, run_experiment, write_csv, OracleRow, PointRunner, Row, CSIT_NOTE,
    CSV_HEADER,
};
