//! Nonparametric regression under covariate shift.
//!
//! The crate covers the full pipeline for pooling a source sample (covariate
//! density `h`) with a target sample (density `h_T`) when the loss is measured
//! under `h_T`:
//!
//! - [`densities`]: Beta and multi-singularity covariate densities.
//! - [`spread`]: the pooled spread function `t_n(x)` that balances squared
//!   bias against the pooled window count.
//! - [`estimators`]: Nadaraya–Watson and gated local polynomial estimators.
//! - [`adapt`]: Beta-shape MLE and Lepski-type smoothness selection.
//! - [`rates`]: closed-form transfer learning rates, SAR and region labels.
//! - [`simharness`]: the seeded Monte Carlo slope experiments.
//! - [`cli`]: config parsing and CSV/SVG output used by the `slp` binary.

pub mod adapt;
pub mod cli;
pub mod densities;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod quadrature;
pub mod rates;
pub mod simharness;
pub mod special;
pub mod spread;

pub use error::{Error, Result};
