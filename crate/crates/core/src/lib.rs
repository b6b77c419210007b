//! Analogy-based software effort estimation with adjustable adaptation
//! strategies.
//!
//! The crate retrieves the nearest historical projects for a target project
//! (mixed numeric/categorical Euclidean distance), then derives an effort
//! estimate through one of several adaptation strategies: plain mean,
//! similarity-weighted means, linear size extrapolation, size-ratio rules,
//! regression towards the mean productivity, or a model-tree adjustment
//! learned from jackknifed attribute differences.
//!
//! The [`evaluation`] module runs the full seeded 3-fold cross-validation
//! protocol and computes MMRE/MdMRE/PRED(25), Wilcoxon signed-rank
//! significance tests, and boxplot statistics over absolute residuals.

pub mod adaptation;
pub mod dataset;
pub mod evaluation;
pub mod modeltree;
pub mod neighbors;

mod error;

pub use error::{Error, Result};
