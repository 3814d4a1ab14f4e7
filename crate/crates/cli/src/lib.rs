//! Library side of the `mpsm` command: configuration, the three
//! subcommands and the acceptance checks.

pub mod analyze;
pub mod config;
pub mod error;
pub mod output;
pub mod sample;
pub mod verify;

pub use config::{ConfigLayer, Ensemble, ExperimentConfig, Format};
pub use error::{CliError, Result};
