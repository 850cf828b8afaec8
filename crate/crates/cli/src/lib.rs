//! Experiment runner for Lyapunov-spectrum robustness studies: TOML configs,
//! presets, the subcommands and their result files.

pub mod config;
pub mod error;
pub mod presets;
pub mod record;
pub mod run;
pub mod validate;

pub use config::{Experiment, ExperimentConfig, Overrides};
pub use error::CliError;
pub use record::{Command, ResultRecord};
pub use run::Outcome;
