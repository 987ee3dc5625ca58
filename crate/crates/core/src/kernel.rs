//! Matérn covariance kernel (smoothness 3/2) with an additive white-noise
//! component, used both to sample spatial confounders and as the working
//! covariance of the GLS baseline.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{LocationRef, Locations};
use crate::error::{Error, Result};

/// Stationary Matérn-3/2 kernel plus white noise:
///
/// ```text
///   k(r) = signal_variance * (1 + sqrt(3) r / lengthscale)
///            * exp(-sqrt(3) r / lengthscale)        for r = |s - s'|,
///   plus noise_variance added on the diagonal (r = 0 between identical
///   observation slots).
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaternKernel {
    pub lengthscale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

/// Diagonal jitter added before Cholesky factorization.
pub const CHOLESKY_JITTER: f64 = 1e-8;

impl MaternKernel {
    pub fn new(lengthscale: f64, signal_variance: f64, noise_variance: f64) -> Result<Self> {
        if !(lengthscale > 0.0) || !lengthscale.is_finite() {
            return Err(Error::Config(format!(
                "kernel lengthscale must be positive, got {lengthscale}"
            )));
        }
        if !(signal_variance >= 0.0) || !(noise_variance >= 0.0) {
            return Err(Error::Config(
                "kernel variances must be non-negative".into(),
            ));
        }
        Ok(Self { lengthscale, signal_variance, noise_variance })
    }

    /// Smooth (correlated) part of the covariance at distance `r`.
    pub fn smooth_cov(&self, r: f64) -> f64 {
        let u = 3f64.sqrt() * r / self.lengthscale;
        self.signal_variance * (1.0 + u) * (-u).exp()
    }

    /// Full covariance matrix over the locations, white noise included.
    pub fn gram(&self, locations: &Locations) -> Result<DMatrix<f64>> {
        let mut g = self.smooth_gram(locations)?;
        for i in 0..g.nrows() {
            g[(i, i)] += self.noise_variance;
        }
        Ok(g)
    }

    /// Covariance matrix of the smooth component only.
    pub fn smooth_gram(&self, locations: &Locations) -> Result<DMatrix<f64>> {
        let n = locations.len();
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.smooth_cov(distance(locations.get(i), locations.get(j))?);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }
}

fn distance(a: LocationRef<'_>, b: LocationRef<'_>) -> Result<f64> {
    match (a, b) {
        (LocationRef::Continuous(x), LocationRef::Continuous(y)) => Ok(x
            .iter()
            .zip(y)
            .map(|(&xi, &yi)| (xi - yi) * (xi - yi))
            .sum::<f64>()
            .sqrt()),
        _ => Err(Error::Config(
            "covariance kernels are defined over continuous locations only".into(),
        )),
    }
}

/// Lower Cholesky factor of `g + jitter I`, with the jitter capped at
/// [`CHOLESKY_JITTER`].
pub fn cholesky_with_jitter(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut jittered = g.clone();
    for i in 0..jittered.nrows() {
        jittered[(i, i)] += CHOLESKY_JITTER;
    }
    match jittered.cholesky() {
        Some(chol) => Ok(chol.unpack()),
        None => Err(Error::Numerical(format!(
            "covariance matrix is not positive definite after jitter {CHOLESKY_JITTER}"
        ))),
    }
}
