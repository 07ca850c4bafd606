use serde::{Deserialize, Serialize};

use crate::tensor::{log2_exact, Rng};
use crate::{Error, Result};

/// Index permutation; `map[i]` is the source index for output slot `i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self { map: (0..n).collect() }
    }

    pub fn from_map(map: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &m in &map {
            if m >= map.len() || std::mem::replace(&mut seen[m], true) {
                return Err(Error::InvalidArgument(format!(
                    "permutation map is not a bijection on 0..{}",
                    map.len()
                )));
            }
        }
        Ok(Self { map })
    }

    pub fn random(n: usize, rng: &mut Rng) -> Self {
        let mut map: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut map);
        Self { map }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &m)| i == m)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (i, &m) in self.map.iter().enumerate() {
            inv[m] = i;
        }
        Self { map: inv }
    }

    /// `out[i] = x[map[i]]`.
    pub fn gather<T: Copy>(&self, x: &[T], out: &mut [T]) {
        for (o, &m) in out.iter_mut().zip(&self.map) {
            *o = x[m];
        }
    }

    /// `out[map[i]] = x[i]`, the transpose (and inverse) of [`Self::gather`].
    pub fn scatter<T: Copy>(&self, x: &[T], out: &mut [T]) {
        for (&v, &m) in x.iter().zip(&self.map) {
            out[m] = v;
        }
    }
}

/// Recursive even/odd split of `0..n`, i.e. index bit reversal over
/// `log2 n` bits.
pub fn bit_reversal_permutation(n: usize) -> Result<Permutation> {
    let bits = log2_exact(n).ok_or(Error::NotPowerOfTwo(n))?;
    let map = (0..n)
        .map(|i| {
            if bits == 0 {
                0
            } else {
                i.reverse_bits() >> (usize::BITS as usize - bits)
            }
        })
        .collect();
    Ok(Permutation { map })
}
