//! Noncoherent MIMO codeword detection laboratory.
//!
//! The crate models block-fading MIMO links whose receiver knows only the
//! channel and noise statistics. Each codeword `S_i` induces a zero-mean
//! Gaussian received vector with covariance `Σ_i`, and everything else is
//! built on top of that: ML detection and LLRs ([`detector`]), pairwise and
//! full error probabilities ([`pep`]), Jeffreys divergence between
//! hypotheses ([`divergence`]), singular-detection verdicts for the large
//! array and high-SNR regimes ([`singularity`]), and the codebooks those
//! verdicts are about ([`codebooks`]).

pub mod error;
pub mod exec;
pub mod linalg;
pub mod rng;

pub mod codebooks;
pub mod detector;
pub mod divergence;
pub mod io;
pub mod model;
pub mod pep;
pub mod singularity;

pub use error::{Error, Result};
pub use exec::Execution;
pub use linalg::{CMatrix, CVector};
