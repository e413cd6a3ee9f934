//! Front end for the `heatlmi` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use commands::{cmd_design, cmd_halanay, cmd_simulate, cmd_sweep, cmd_verify, CommandOutput};
pub use config::{Overrides, RunConfig, ENV_PREFIX};
pub use error::{exit, CliError};
