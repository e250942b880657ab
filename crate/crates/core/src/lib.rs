//! Robust fitting and inference for linear regression with skew-normal errors.
//!
//! The estimator minimizes the density power divergence (DPD) between the data and
//! the `SN(x_iᵀβ, σ, γ)` model, indexed by a tuning parameter `α ≥ 0`. At `α = 0`
//! it coincides with maximum likelihood; larger `α` trades efficiency for bounded
//! influence of outlying responses.
//!
//! The crate is `no_std` and only needs `alloc`. IO, CSV ingestion and the command
//! line front end live in the companion `snfit` crate.
//!
//! Module map:
//! - [`numerics`]: real-line quadrature, Owen's T, root finding, special functions, RNG streams
//! - [`sn_dist`]: skew-normal density, cdf, quantile, moments, sampling and the regression score
//! - [`dpd_fit`]: the DPD objective, its gradient and the multistart optimizer
//! - [`asymptotics`]: `ξ`, `J`, `K`, the sandwich covariance and ARE tables
//! - [`influence`]: influence functions of the estimator and of the Wald-type test
//! - [`wald`]: Wald-type tests of `m(θ) = 0` and contiguous power
//! - [`tuning`]: data-driven choice of `α` (iterated Warwick–Jones)
//! - [`simulate`]: Monte-Carlo designs for bias/MSE and level/power studies
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod asymptotics;
pub mod dpd_fit;
mod error;
pub mod influence;
pub mod linalg;
pub mod numerics;
mod serde_nalgebra;
pub mod simulate;
pub mod sn_dist;
pub mod tuning;
pub mod wald;

pub use error::{Error, Result};

pub use asymptotics::AsymptoticMatrices;
pub use dpd_fit::{FitConfig, FitResult, Optimizer, RegressionData};
pub use numerics::RngStream;
pub use sn_dist::{ParamVector, SnParams};
pub use wald::{HypothesisSpec, TestResult};

/// Crate version, embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
