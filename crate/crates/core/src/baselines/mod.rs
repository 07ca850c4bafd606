//! Comparison layers: dense, low-rank, circulant and Fastfood.

mod circulant;
mod dense;
mod fastfood;
mod hadamard;
mod lowrank;

pub use circulant::{CirculantCache, CirculantGrads, CirculantLayer};
pub use dense::{DenseCache, DenseGrads, DenseLinear};
pub use fastfood::{FastfoodCache, FastfoodGrads, FastfoodLayer};
pub use hadamard::{walsh_hadamard, walsh_hadamard_in_place};
pub use lowrank::{LowRankCache, LowRankGrads, LowRankLayer};
