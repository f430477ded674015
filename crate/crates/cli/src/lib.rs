//! Command-line front end: scenario files, estimation, cross-validation,
//! Monte Carlo sweeps and SVG panels.

pub mod commands;
pub mod config;
pub mod error;
pub mod files;
pub mod render;

pub use commands::{cmd_cv, cmd_estimate, cmd_simulate, cmd_sweep};
pub use config::{Overrides, RunConfig};
pub use error::{CliError, CliResult};
