//! Crate-wide error type.
//!
//! Numerical routines return structured errors rather than panicking:
//! callers (the CLI, sweep drivers) distinguish configuration mistakes
//! from genuine numerical failures when choosing an exit code.

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Model construction or validation failed; the message names the
    /// violated standing-hypothesis clause.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// A caller-supplied argument is outside the documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Adaptive quadrature exhausted its subdivision budget.
    #[error("quadrature did not converge on [{a:e}, {b:e}]: estimate {estimate:e}, error bound {error:e}")]
    Quadrature {
        a: f64,
        b: f64,
        estimate: f64,
        error: f64,
    },

    /// The stochastic growth rate vanishes; asymptotic classification
    /// (and everything downstream of it) is undefined at criticality.
    #[error("critical stochastic growth rate: {0}")]
    CriticalGrowthRate(String),

    /// The truncated computational domain is inadequate for the
    /// requested computation.
    #[error("domain truncation inadequate: {0}")]
    Truncation(String),

    /// A linear-algebra kernel failed (singular system, no convergence).
    #[error("linear algebra failure: {0}")]
    Linalg(String),

    /// A stochastic simulation reached an unrecoverable state.
    #[error("simulation failure: {0}")]
    Simulation(String),

    /// Underlying I/O failure while writing an artifact.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
