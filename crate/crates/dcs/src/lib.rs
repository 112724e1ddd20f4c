//! Runtime, file formats and command-line harness for decomposition sampling.
//!
//! The sampling algorithms live in [`dcs_core`], re-exported here as `core`.

pub use dcs_core as core;

pub mod cli;
pub mod error;
pub mod experiment;
pub mod io;
pub mod runtime;

pub use error::{Error, Result};
