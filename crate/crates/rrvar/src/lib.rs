//! Reduced-rank covariance estimation for vector autoregressive models.
//!
//! The library fits a structured covariance model `Sigma = U Λ U' + σ² I`
//! to independent observations via an analytic maximum-likelihood solution,
//! selects the rank by BIC and integrates the estimator into VAR(p) fitting,
//! one-step forecasting and diagnostics. A seeded simulation harness
//! benchmarks the estimator against shrinkage baselines.
//!
//! See the `book/` directory for a guided tour of the model and the
//! estimation procedures; the code snippets there mirror the doc-tests in
//! each module.

pub mod error;
pub mod forecast;
pub mod linalg;
pub mod metrics;
pub mod rrcov;
pub mod shrinkage;
pub mod simharness;
pub mod var;

pub use error::{Error, Result};
