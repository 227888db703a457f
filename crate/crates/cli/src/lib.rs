//! Library behind the `submatch` binary. Every subcommand is a plain
//! function so it can be driven in-process by tests.

pub mod commands;
pub mod config;
pub mod graphref;

pub use config::{Overrides, RunConfig};

/// Version string embedded in every artifact.
pub const VERSION: &str = concat!("submatch ", env!("CARGO_PKG_VERSION"));
