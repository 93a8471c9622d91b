//! Configuration, file formats and command dispatch for the
//! `descriptor-minimax` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod report;

pub use commands::{run, Command, Outcome, RunOptions, EXIT_ERROR, EXIT_INFEASIBLE};
pub use config::{parse_config, parse_config_str, Mode, ProblemConfig};
pub use error::CliError;
pub use report::{ResultReport, Sigma};
