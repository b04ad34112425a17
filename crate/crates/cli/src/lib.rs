//! Subcommands of the `hdlink` binary, usable as a library.

pub mod commands;
pub mod config;

pub use commands::Run;
pub use config::Config;
