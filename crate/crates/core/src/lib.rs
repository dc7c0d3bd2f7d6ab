//! Mining recurring daily behavioral motifs from uncertain multi-sensor
//! lifelogs.
//!
//! The pipeline: [`ingest`] raw logs into per-day entity lists, estimate
//! movement with [`location`], snap timestamps onto a human-scale grid with
//! [`temporal`], and find recurring slot-aligned item sets with [`mining`].
//! [`analysis`], [`synth`] and [`harness`] cover evaluation.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod harness;
pub mod ingest;
pub mod location;
pub mod mining;
pub mod pipeline;
pub mod synth;
pub mod temporal;

pub use error::{Error, Result};
