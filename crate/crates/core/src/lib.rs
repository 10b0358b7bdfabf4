//! Distributed optimal subsampling for Cox proportional-hazards regression.
//!
//! Each site fits a weighted Cox model on a small, probability-weighted
//! subsample of its records and ships only a summary (estimate, Hessian,
//! score-variance "meat" matrix, sizes). A central site combines the
//! summaries in one round into a distributed estimate with a sandwich
//! variance and Wald intervals.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, CSV ingestion,
//! the experiment driver and the CLI live in the `dsubcox` crate.
//!
//! Module map:
//!
//! - [`cox`]: weighted risk-set sums, score, information, Newton solver,
//!   Breslow cumulative hazard, score residuals and the meat matrix.
//! - [`subsample`]: uniform and influence-norm sampling plans, alias-table
//!   draws, the two-step site fit and the site summary.
//! - [`federation`]: one-round aggregation and Wald intervals.
//! - [`datagen`]: simulation covariate laws, event times and censoring
//!   calibration.

#![no_std]

extern crate alloc;

pub mod cox;
pub mod data;
pub mod datagen;
pub mod error;
pub mod federation;
pub mod linalg;
pub mod seed;
pub mod stats;
pub mod subsample;

pub use cox::{EstimationSettings, FitResult, RiskSetSums, StepFunction};
pub use data::{Subject, SurvivalDataset, WeightedSample};
pub use error::{Error, Result};
pub use federation::{aggregate, wald_interval, ConfidenceInterval, DistributedEstimate, Spread};
pub use linalg::Matrix;
pub use subsample::{SamplingPlan, SiteSummary, TwoStepConfig};
