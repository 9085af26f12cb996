//! Configuration loading and stage orchestration for the `koopman-lyap` binary.

pub mod config;
pub mod error;
pub mod pipeline;

pub use config::{load_config, parse_config, RunConfig};
pub use error::{CliError, ErrorKind};
pub use pipeline::{execute, RunManifest, Stage};
