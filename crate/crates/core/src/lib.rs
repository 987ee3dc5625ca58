//! Robust estimation of spatially varying treatment effects under spatial
//! confounding.
//!
//! The pipeline works in two stages on observational triples (y, z, s) of
//! outcome, exposure, and location:
//!
//! 1. **Residualize** ([`residualize`]): regress both the outcome and the
//!    exposure on a spatial basis expansion with a pivotal square-root-LASSO
//!    ([`sqrtlasso`]), leaving residuals that carry the effect but not the
//!    smooth spatial confounding shared by both equations.
//! 2. **Estimate** ([`estimator`]): fit the spatially varying effect
//!    coefficient on the residuals with a penalized program whose weights
//!    make it robust to the estimation error left in the exposure
//!    residuals.
//!
//! Locations may live in a continuous box (1–3 axes, compact cubic
//! B-spline tensor bases; see [`basis`]) or in a finite set of discrete
//! regions (one-hot basis). Uncertainty comes from a pivotal bootstrap over
//! whole rows ([`bootstrap`]); comparison baselines (joint least squares,
//! per-region least squares, and a GLS fit with a spatial random effect)
//! live alongside the main estimator. [`synth`] generates the seeded
//! synthetic benchmarks the binary and the test suite both use.

pub mod basis;
pub mod bootstrap;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod kernel;
pub mod residualize;
pub mod sqrtlasso;
pub mod synth;

pub use error::{Error, Result};
