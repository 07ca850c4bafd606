//! Flat block-butterfly sparse layer plus a low-rank term.
//!
//! The sparse part keeps learnable `b × b` blocks on the union of the
//! block-level butterfly factor supports: block `(i, j)` is present when
//! `i == j` or `i XOR j` is a power of two below the retained band limit.

mod layer;
mod mask;

pub use layer::{PixelflyCache, PixelflyConfig, PixelflyGrads, PixelflyLayer};
pub use mask::BlockButterflyMask;
