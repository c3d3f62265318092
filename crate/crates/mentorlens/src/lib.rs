//! Mentorship inference pipeline: file formats, a synthetic corpus generator,
//! parallel drivers over `mentorlens-core`, and the `mentorlens` command line.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
