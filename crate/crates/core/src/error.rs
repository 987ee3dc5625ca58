use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: basis specification, quantile order,
    /// solver settings, run configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Invalid data: non-finite entries, mismatched lengths, too few rows.
    #[error("invalid data: {0}")]
    Data(String),

    /// A location lies outside the declared spatial domain.
    #[error("location out of domain: {0}")]
    OutOfDomain(String),

    /// No exposure variation is left after residualization (or within a
    /// region), so no effect is identifiable.
    #[error("degenerate exposure: {0}")]
    DegenerateExposure(String),

    /// Discrete regions with no observations, listed 1-based.
    #[error("no observations in region(s) {0:?}")]
    MissingRegions(Vec<usize>),

    /// Numerical failure: non-positive-definite Gram matrix after jitter,
    /// exhausted bootstrap redraws.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
