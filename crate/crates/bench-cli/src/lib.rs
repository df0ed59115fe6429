//! Experiment harness for `gpfso`: replicated runs from a key-value config,
//! trace CSVs, log-log rate fits and success frequencies.

pub mod config;
pub mod experiment;
pub mod slope;

pub use config::{apply_override, parse_config_text, sweep_grid, ConfigError, ExperimentConfig, RawConfig};
pub use experiment::{
    aggregate, read_column, run_experiment, run_replication, sweep, AggregateRow, ExperimentReport,
    HarnessError, RunOutcome,
};
pub use slope::{fit_slope, success_rate, SlopeError, SlopeFit};
