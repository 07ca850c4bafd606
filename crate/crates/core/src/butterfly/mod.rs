//! Butterfly factorization `T = B·P`: a permutation followed by `log2 N`
//! butterfly factors, each mixing index pairs at a fixed stride.
//!
//! Each factor is stored as one `(a, b, c, d)` record per index pair
//! `(i, j = i + stride)`:
//!
//! ```text
//! y_i = a·x_i + b·x_j
//! y_j = c·x_i + d·x_j
//! ```
//!
//! In block form a factor at stride `s` is `[[D1, D2], [D3, D4]]` repeated
//! along the diagonal, where `D1..D4` are `s × s` diagonals holding the `a`,
//! `b`, `c` and `d` values of the pairs in that block. The FFT is the special
//! case `D1 = D3 = I`, `D2 = Ω`, `D4 = -Ω` with the bit-reversal permutation.

mod fft;
mod layer;
mod linear;
mod permutation;

pub use fft::{fft_configure, inverse_fft_configure, naive_dft, FftPlan};
pub use layer::{ButterflyCache, ButterflyGrads, ButterflyInit, ButterflyLayer, ButterflyLevel};
pub use linear::{ButterflyLinear, ButterflyLinearCache, ButterflyLinearGrads};
pub use permutation::{bit_reversal_permutation, Permutation};
