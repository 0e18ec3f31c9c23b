//! Orchestration behind the `lifenav` binary: scene files, dataset
//! generation, compression sweeps, reports and trajectory plots.

pub mod commands;
pub mod config;
pub mod error;
pub mod plot;

pub use commands::{cmd_gen_scenes, cmd_plot, cmd_run, cmd_sweep, cmd_validate};
pub use config::ExperimentConfig;
pub use error::{CliError, Result};
