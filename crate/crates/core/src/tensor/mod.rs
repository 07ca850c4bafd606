//! Numeric substrate: scalar traits, dense and CSR matrices, the seeded
//! generator and the operation-counting scalar.

mod counting;
mod csr;
mod dense;
mod rng;
mod scalar;

pub use counting::{count_ops, Counted, OpCounts};
pub use csr::CsrMatrix;
pub use dense::{ComplexVector, DenseMatrix, DenseVector};
pub use rng::Rng;
pub use scalar::{is_power_of_two, log2_exact, Field, Scalar};

pub use num_complex::Complex64;

/// Rows of output below this amount of work are computed serially even when
/// a multi-threaded pool is active.
pub(crate) const PAR_MIN_WORK: usize = 1 << 15;

pub(crate) fn parallel_enabled(work: usize) -> bool {
    work >= PAR_MIN_WORK && rayon::current_num_threads() > 1
}
