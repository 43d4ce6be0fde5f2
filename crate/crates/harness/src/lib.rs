//! Experiment runner for the parameter-free private optimizer: JSON configs
//! in, per-checkpoint result rows, summaries and ledger totals out.

pub mod checks;
pub mod config;
pub mod output;
pub mod rate;
pub mod runner;

pub use config::{ExperimentSpec, NoiseSpec, OptimizerSpec};
pub use output::{emit_results, emit_traces, Format, JsonReport};
pub use rate::{fit_rate_slope, RateFit};
pub use runner::{run_experiment, ExperimentOutput, ResultRow, RunOptions, Summary};
