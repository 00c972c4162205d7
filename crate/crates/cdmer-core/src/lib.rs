//! Cross-database transfer regression over block-structured features.
//!
//! The crate provides, in dependency order:
//!
//! - [`kernels`]: block-structured feature sets and the per-block kernel
//!   matrices computed against the joined source+target basis;
//! - [`optimizer`]: the augmented-Lagrangian coefficient solver, the
//!   non-negative lasso for region weights, and simplex projection;
//! - [`rstr`]: the region selective transfer regression estimator;
//! - [`baseline`]: the no-adaptation linear-regression reference;
//! - [`data`]: feature-file ingestion, the builtin task catalogue, and the
//!   synthetic domain-shift generator;
//! - [`metrics`]: confusion matrices, mean F1-score, and accuracy.

pub mod baseline;
pub mod data;
pub mod error;
pub mod kernels;
pub mod metrics;
pub mod model_io;
pub mod optimizer;
pub mod rstr;

pub use error::{Error, Result};
