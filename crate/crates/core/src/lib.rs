//! Spectral pseudodifferential calculus on finite metric measure graphs.
//!
//! The crate builds finite model geometries (cycles, paths, grid tori, binary
//! trees, Sierpinski-type gaskets), equips them with nonnegative self-adjoint
//! operators given by Dirichlet forms, and implements the functional calculus
//! on top of a dense mu-weighted eigendecomposition. On that foundation it
//! provides smooth Littlewood-Paley partitions, symbol classes with an
//! expression language, elementary decompositions of symbols, operator-norm
//! and off-diagonal decay measurements, BMO / T(1) / paraproduct machinery,
//! and Sobolev-scale mapping and embedding checks.
//!
//! Everything is deterministic: eigenvectors follow a fixed ordering and sign
//! convention, random sampling is seeded ChaCha, and reports serialize with
//! fixed formatting so repeated runs are byte-identical.

pub mod bmo;
pub mod calculus;
pub mod norms;
pub mod operator;
pub mod psido;
pub mod sobolev;
pub mod space;
pub mod symbols;

mod eigh;
mod fit;

pub use fit::{linfit, LinFit};

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dim(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("eigensolver failed to converge at index {0}")]
    NoConverge(usize),
    #[error("operator is not positive semidefinite (lambda_min = {0:.3e})")]
    NotPsd(f64),
    #[error("symbol parse error: {0}")]
    Parse(#[from] symbols::ParseError),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
