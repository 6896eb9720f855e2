//! Estimation of principal causal effects and attribution metrics (the
//! probability that treatment was necessary or sufficient for an
//! intermediate event) when principal strata are confounded by an
//! unmeasured variable, using a pair of negative-control proxies.
//!
//! The crate is organized around the estimation flow:
//!
//! - [`numerics`]: normal special functions, Gauss-Hermite quadrature,
//!   deterministic RNG streams, GMM and MLE solvers.
//! - [`models`]: the parametric model family (confounding bridge, treatment,
//!   proxy-intermediate, ordered-probit strata, outcome means).
//! - [`identify`]: strata proportions, mixture weights, and the rank
//!   diagnostics behind identification.
//! - [`estimate`]: the three-step fitting pipeline and the plug-in
//!   effect / attribution estimators.
//! - [`dgp`]: the synthetic data-generating mechanism with its derived
//!   parameter constraints and ground-truth oracles.
//! - [`bench`]: bootstrap confidence intervals and the replication study
//!   harness (bias / SD / coverage tables).

pub mod bench;
pub mod dataset;
pub mod dgp;
pub mod error;
pub mod estimate;
pub mod identify;
pub mod models;
pub mod numerics;

pub use error::{Error, Result, Stage};

/// Scalar type the estimation pipeline runs at.
pub type Real = f64;

/// Default Gauss-Hermite rule at the pipeline's working precision.
pub type QuadratureRule = numerics::quadrature::GaussHermite<Real>;
