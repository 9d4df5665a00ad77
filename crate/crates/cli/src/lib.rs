//! Command implementations behind the `mctn` binary.

pub mod commands;
pub mod config;
pub mod run;

pub use config::{Overrides, RoleArgs, RunConfig};
