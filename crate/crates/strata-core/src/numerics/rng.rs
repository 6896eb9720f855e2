//! Deterministic, splittable random number streams.
//!
//! A `SeedSpec` (base seed, stream index) maps to a ChaCha12 generator state
//! by a pure function, so replications and bootstrap resamples can each own
//! an independent stream and reproduce bit-identically regardless of
//! execution order.

use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub base: u64,
    pub stream: u64,
}

impl SeedSpec {
    pub fn new(base: u64, stream: u64) -> Self {
        SeedSpec { base, stream }
    }

    /// Derived spec for a sub-task, offset within this stream's index space.
    pub fn substream(&self, offset: u64) -> SeedSpec {
        SeedSpec { base: self.base, stream: self.stream.wrapping_add(offset) }
    }
}

/// One deterministic stream of draws.
pub struct RngStream {
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn from_spec(spec: SeedSpec) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(spec.base);
        rng.set_stream(spec.stream);
        RngStream { rng }
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(rand_distr::StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn bernoulli(&mut self, p: f64) -> u8 {
        u8::from(self.uniform() < p)
    }

    /// Index in 0..n for bootstrap resampling.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    /// One draw from a bivariate normal via Cholesky of the 2x2 covariance.
    pub fn mvn2(&mut self, mean: [f64; 2], cov: [[f64; 2]; 2]) -> Result<[f64; 2]> {
        let chol = cholesky2(cov)?;
        let e0 = self.normal();
        let e1 = self.normal();
        Ok([mean[0] + chol[0] * e0, mean[1] + chol[1] * e0 + chol[2] * e1])
    }
}

/// Lower Cholesky factor (l11, l21, l22) of a symmetric PD 2x2 matrix.
pub fn cholesky2(cov: [[f64; 2]; 2]) -> Result<[f64; 3]> {
    if cov[0][1] != cov[1][0] {
        return Err(Error::InvalidArgument(format!(
            "covariance not symmetric: {} vs {}",
            cov[0][1], cov[1][0]
        )));
    }
    if !(cov[0][0] > 0.0) {
        return Err(Error::InvalidArgument("covariance not positive definite".into()));
    }
    let l11 = cov[0][0].sqrt();
    let l21 = cov[0][1] / l11;
    let rest = cov[1][1] - l21 * l21;
    if !(rest > 0.0) {
        return Err(Error::InvalidArgument("covariance not positive definite".into()));
    }
    Ok([l11, l21, rest.sqrt()])
}
