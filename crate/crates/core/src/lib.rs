//! Parameter choice for Tikhonov regularization of linear ill-posed problems.
//!
//! Problems are posed directly in singular-value coordinates
//! ([`spectral`]). Regularized solutions live on a geometric grid of
//! regularization strengths ([`regularization`]), noisy data come from
//! [`noise`], and [`choice`] implements the fast balancing principle next to
//! Lepskij balancing and the discrepancy principle. [`diagnostics`] checks
//! the probabilistic and structural assumptions behind the oracle bounds by
//! Monte Carlo, and [`experiments`] runs whole comparison batches.

pub mod choice;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod noise;
pub mod problem_file;
pub mod regularization;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
