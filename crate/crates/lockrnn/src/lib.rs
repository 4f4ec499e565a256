//! Command-line workbench around `lockrnn-core`: file formats, atomic
//! artifact writes, subcommands, sweeps and the shipped fixtures.

pub mod cli;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod sweep;

pub use error::CliError;
