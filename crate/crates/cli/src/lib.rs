//! Command-line front end for the qutrit battery toolkit: configuration,
//! experiment runners and run manifests.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

pub use config::{ExperimentConfig, RawConfig};
pub use error::{exit, CliError};
pub use manifest::{verify_manifest, OutputSink, RunManifest};
