//! Configuration, orchestration and report formats for `rotsmag-core`.

pub mod config;
pub mod execute;
pub mod snapshot;

pub use config::{parse_config, Command, ConfigError, RunConfig};
pub use execute::{execute, Manifest, RunError};
