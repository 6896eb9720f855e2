//! Self-contained numerical kernel: normal special functions, Gauss-Hermite
//! quadrature, deterministic RNG streams, and the GMM / MLE solvers used by
//! every estimation step.

pub mod gmm;
pub mod mle;
pub mod normal;
pub mod quadrature;
pub mod rng;
pub mod roots;

use std::fmt::{Debug, Display};

/// Floating scalar the kernel math is generic over (f32 or f64 in practice).
pub trait Scalar:
    num_traits::Float + num_traits::FromPrimitive + Debug + Display + Copy + 'static
{
}

impl<T> Scalar for T where
    T: num_traits::Float + num_traits::FromPrimitive + Debug + Display + Copy + 'static
{
}

pub use gmm::{gmm_solve, GmmOptions, GmmProblem, GmmReport, GmmSolution, Weighting};
pub use mle::{linear_gaussian_mle, probit_mle, LinearFit, ProbitFit};
pub use normal::{normal_cdf, normal_pdf, normal_quantile};
pub use quadrature::{gh_expectation, GaussHermite};
pub use rng::{RngStream, SeedSpec};
pub use roots::root_find_1d;
