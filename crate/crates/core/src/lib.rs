//! Epsilon-support-vector regression with a data-driven insensitive
//! parameter.
//!
//! The tube half-width `epsilon` and the noise scale `s` are usually fixed
//! by rules of thumb or cross validation. This crate instead estimates both
//! from pilot residuals by maximizing a working likelihood built from the
//! epsilon-insensitive Laplacian density, then retrains on targets
//! standardized by the estimated scale. The crate bundles:
//!
//! - [`solver`]: an SMO-style dual solver and the four-step data-driven
//!   pipeline ([`solver::fit_dd`]);
//! - [`likelihood`]: the insensitive loss and density, the `(epsilon, s)`
//!   estimator, its large-sample limit, and a sampler for the density;
//! - [`evaluation`]: baseline tube-selection rules (fixed tuning,
//!   Cherkassky-Ma, k-fold CV) and MAE/RMSE reporting against the tuning
//!   baseline;
//! - [`simulation`]: seeded synthetic generators (sinc and linear, three
//!   noise families) and the Monte-Carlo experiment runner;
//! - [`data`] / [`kernel`] / [`rng`] / [`model_io`]: dataset plumbing,
//!   kernels, deterministic random streams, and model persistence.

pub mod data;
pub mod error;
pub mod evaluation;
pub mod integrate;
pub mod kernel;
pub mod likelihood;
pub mod model_io;
pub mod rng;
pub mod simulation;
pub mod solver;

pub use data::{read_csv, split, Dataset, SplitSpec, Standardization};
pub use error::{Error, Result};
pub use kernel::{KernelFamily, KernelSpec};
pub use likelihood::{LimitingParams, WorkingLikelihoodFit};
pub use rng::RngStream;
pub use solver::{fit_dd, fit_dd_with, solve_svr, DdFit, RefitC, SvrConfig, SvrModel};
