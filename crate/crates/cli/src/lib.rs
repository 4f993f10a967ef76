//! Batch front-end for `disloc-core`: configuration, orchestration and export.

pub mod commands;
pub mod config;
pub mod manifest;

pub use commands::{CmdError, Overrides};
pub use config::{ConfigError, RunConfig};

/// Exit status for configuration errors.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for numeric failures.
pub const EXIT_NUMERIC: i32 = 3;
