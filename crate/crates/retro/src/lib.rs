//! File formats, parallel drivers and subcommands for the `retro` tool.

pub mod commands;
pub mod error;
pub mod formats;
pub mod rten;

pub use error::{Error, Result};
