//! File formats, experiment presets and the command-line driver for
//! [`alignclip_core`].

pub mod checkpoint;
pub mod cli;
pub mod config;
mod container;
pub mod dataset_file;
mod error;
pub mod presets;
pub mod report;

pub use error::{exit, Error, Result};
