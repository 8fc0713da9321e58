//! Config-driven batch driver for the `cns` binary.

pub mod commands;
pub mod config;

pub use commands::{execute, Failure};
pub use config::{parse_config, parse_config_str, RunConfig};
