//! Command-line front end for `softrgg`: configuration parsing, subcommand
//! bodies and the desk-scale verification suite.

pub mod config;
pub mod run;
pub mod verify;

pub use config::{load_config, parse_config, ConfigError, Format, Purpose, RunConfig};
pub use run::{resolve_workers, CliError, WORKER_CAP_VAR};
