//! Configuration files, PGM targets, CSV records and the `covbalance`
//! command line on top of `covbalance-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod pgm;
pub mod plot;
pub mod record;
pub mod runner;

pub use error::{CliError, Result};
