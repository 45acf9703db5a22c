//! Library side of the `qobs` command: config parsing, the run pipeline and
//! CSV/JSON output.

pub mod config;
pub mod output;
pub mod run;

pub use config::{Config, ConfigError, Overrides, Settings};
pub use run::{Run, RunError, RunReport};
