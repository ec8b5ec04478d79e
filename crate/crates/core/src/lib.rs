//! SURE tuning, excess degrees of freedom and their bounds.
//!
//! The crate implements tunable estimator families whose tuning parameter is
//! chosen by minimizing Stein's unbiased risk estimate, along with estimators
//! of the excess degrees of freedom this selection step adds, Monte Carlo
//! oracles to check them against, and the bounds that control them.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod bootstrap;
pub mod bounds;
pub mod error;
pub mod exec;
pub mod family;
pub mod linalg;
pub mod model;
pub mod montecarlo;
pub mod shrinkage;
pub mod sim;
pub mod soft_threshold;
pub mod special;
pub mod stein;
pub mod subset;

pub use error::{Error, Result};
pub use exec::Execution;
pub use family::{sure, tune_by_sure, EstimatorFamily, Pinned, TunedFit, Tuning, TuningDomain};
pub use model::{GaussianModel, NoiseLevel};
pub use montecarlo::{EdfMethod, EdfReport, McEstimate, MonteCarlo};
