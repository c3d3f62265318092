//! Core algorithms for inferring scholarly mentorship from co-authorship records.
//!
//! Everything in this crate is pure computation over in-memory data and only
//! needs an allocator: corpus indexing, gold-pair linking, candidate mentor
//! generation, pairwise and graph feature extraction, a gradient-boosted tree
//! classifier, and a negative binomial GLM. File formats, parallel drivers and
//! the command line live in the `mentorlens` crate.
#![cfg_attr(not(test), no_std)]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod cohort;
pub mod corpus;
mod error;
pub mod gbdt;
pub mod graph;
pub mod glm;
pub mod linker;
mod math;
pub mod pairfeat;
pub mod stats;

pub use error::{Error, Result};
