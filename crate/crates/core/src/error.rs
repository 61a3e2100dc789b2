//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by model construction and the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("{what} is not Hermitian (asymmetry {asymmetry:e})")]
    NotHermitian { what: &'static str, asymmetry: f64 },

    #[error("{what} is not positive semidefinite (minimum eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { what: &'static str, min_eigenvalue: f64 },

    #[error("matrix is not positive definite (minimum eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("matrix is near-singular (eigenvalue ratio {ratio:e} below 1e-12)")]
    NearSingular { ratio: f64 },

    #[error(
        "channel covariance has rank {rank} < {dim}; high-SNR analysis requires a full-rank \
         channel (reduce the model onto the channel's range first)"
    )]
    RankDeficientChannel { rank: usize, dim: usize },

    #[error("Jeffreys divergence evaluated to {0:e}, below the cancellation guard")]
    NegativeDivergence(f64),

    #[error("eigendecomposition failed to converge")]
    EigenFailure,

    #[error("quadrature did not converge: error estimate {estimate:e} exceeds tolerance {tol:e}")]
    Quadrature { estimate: f64, tol: f64 },

    #[error("infeasible codebook: {0}")]
    Infeasible(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
