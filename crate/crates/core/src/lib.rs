//! Data-driven smooth specification tests for parametric regression models.
//!
//! A null model `mu(x; theta)` is fitted by least squares and its residuals
//! `U` are fed to a family of quadratic forms `T_h = U' W_h U`, one per
//! bandwidth on a geometric grid. The bandwidth is chosen by maximizing
//! `T_h - gamma_n v_{h,h0}`, which favors the coarsest bandwidth `h0` under
//! the null, and the selected statistic is standardized by `v_{h0}`.
//! Critical values come from the standard normal or from a smooth
//! conditional moments bootstrap.
//!
//! - [`smoother`]: weight matrices (polynomial, piecewise, kernel, additive) and grids
//! - [`model`]: parametric families, multistart nonlinear least squares, OLS
//! - [`variance`]: local and differencing variance estimators, `v_h` standardizations
//! - [`engine`]: statistics, bandwidth selection, test variants
//! - [`bootstrap`]: multiplier laws and bootstrap critical values
//! - [`harness`]: seeded Monte Carlo experiments and rejection tables
//! - [`cli`]: dataset ingestion and the command-line front end

// `!(a > b)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
#[cfg(feature = "cli")]
pub mod cli;
pub mod data;
pub mod engine;
pub mod error;
pub mod harness;
pub mod model;
pub mod quadform;
pub mod smoother;
pub mod variance;

pub use data::Dataset;
pub use engine::{
    run_fixed_h_test, run_max_test, run_selected_self_normalized, run_test, CriticalMode,
    TestConfig, TestOutcome, TestVariant,
};
pub use error::{Error, Result};
pub use model::{FitOptions, FitResult, ParametricModel};
pub use smoother::{SmootherFamily, SmootherGrid, WeightMatrix};
pub use variance::{SigmaEstimate, VarianceMethod};
