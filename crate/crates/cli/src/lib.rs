//! Scenario-driven pipeline around the `prodisp` model library.

pub mod analysis;
pub mod cli;
pub mod commands;
pub mod economy;
pub mod error;
pub mod output;
pub mod panel;
pub mod scenario;

pub use error::{CliError, Result};
