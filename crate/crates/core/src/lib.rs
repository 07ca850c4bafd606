//! Structured linear layers built on butterfly factorizations.
//!
//! The crate provides
//!
//! * dense and CSR matrix kernels with a fixed summation order ([`tensor`]),
//! * learnable butterfly layers and the FFT as a fixed butterfly ([`butterfly`]),
//! * pixelated (flat block) butterfly layers with a low-rank term ([`pixelfly`]),
//! * the dense, low-rank, circulant and Fastfood comparison layers ([`baselines`]),
//! * a single-hidden-layer classifier with SGD-momentum training ([`train`]),
//! * timing, sweep and report emitters ([`bench`]),
//! * finite-difference and oracle checks used by `sparsefly verify` ([`verify`]).

pub mod baselines;
pub mod bench;
pub mod butterfly;
pub mod error;
pub mod layer;
pub mod pixelfly;
pub mod tensor;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
pub use layer::{Gradients, Layer};
pub use tensor::{CsrMatrix, DenseMatrix, DenseVector, Field, Rng, Scalar};
