//! File formats, experiment driver and command-line front end for
//! distributed optimal subsampling in Cox regression.
//!
//! The numerics live in [`dsubcox_core`]; this crate adds what needs `std`:
//!
//! - [`csv_io`]: survival data as `time,status,x1,…,xp` CSV
//! - [`summary_file`]: the text format sites use to ship their summaries
//! - [`config`]: `key = value` experiment configuration
//! - [`experiment`]: paired OSP/UNIF Monte Carlo runs and their metrics
//! - [`timing`]: single-thread wall-clock comparison with the full-data fit
//! - [`report`]: metrics, raw-estimate and timing CSV output

pub mod config;
pub mod csv_io;
pub mod error;
pub mod experiment;
pub mod report;
pub mod summary_file;
pub mod timing;

pub use dsubcox_core as core;
pub use error::{HarnessError, Result};
