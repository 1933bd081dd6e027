//! Non-negative matrix factorization with covariates.
//!
//! Approximates a non-negative `P x N` observation matrix as `X Theta A`,
//! where `A` is a known covariate matrix (identity, explicit design, or
//! Gaussian-kernel evaluations of per-individual features), `X` is a
//! column-stochastic basis and `Theta` maps covariates to basis
//! coefficients. Also provides the closed-form growth curve model
//! estimator for comparison and K-fold cross-validation of the kernel
//! bandwidth.

pub mod cli;
pub mod cv;
pub mod error;
pub mod gcm;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod matrix;
pub mod nmf;

pub use error::{Error, Result};
pub use matrix::Matrix;
