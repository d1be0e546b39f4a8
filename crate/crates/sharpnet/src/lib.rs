//! File formats, dataset IO, training loop and command implementations for
//! the SHARP-Net toolkit. The numerical core lives in `sharpnet-core`.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod files;
pub mod train;

pub use error::{CliError, Result};
