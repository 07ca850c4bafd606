use serde::Serialize;

use crate::tensor::{is_power_of_two, log2_exact};
use crate::{Error, Result};

/// Block support of a flat block butterfly, stored block-CSR style.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BlockButterflyMask {
    n: usize,
    block: usize,
    grid: usize,
    levels: usize,
    /// Sorted `(block_row, block_col)` pairs.
    blocks: Vec<(usize, usize)>,
    /// `row_ptr[i]..row_ptr[i + 1]` indexes the blocks of block row `i`.
    row_ptr: Vec<usize>,
}

impl BlockButterflyMask {
    /// Full mask: all `log2(n / block)` bands.
    pub fn build(n: usize, block: usize) -> Result<Self> {
        let grid = Self::grid(n, block)?;
        Self::build_with_levels(n, block, log2_exact(grid).expect("grid is a power of two"))
    }

    /// Mask keeping only the bands `i XOR j == 2^t` for `t < levels`.
    pub fn build_with_levels(n: usize, block: usize, levels: usize) -> Result<Self> {
        let grid = Self::grid(n, block)?;
        let max = log2_exact(grid).expect("grid is a power of two");
        if levels > max {
            return Err(Error::InvalidArgument(format!(
                "levels {levels} exceeds log2 of the block grid {grid} ({max})"
            )));
        }
        let mut blocks = Vec::with_capacity(grid * (1 + levels));
        let mut row_ptr = Vec::with_capacity(grid + 1);
        row_ptr.push(0);
        for i in 0..grid {
            let mut cols: Vec<usize> = std::iter::once(i).chain((0..levels).map(|t| i ^ (1 << t))).collect();
            cols.sort_unstable();
            blocks.extend(cols.into_iter().map(|j| (i, j)));
            row_ptr.push(blocks.len());
        }
        Ok(Self {
            n,
            block,
            grid,
            levels,
            blocks,
            row_ptr,
        })
    }

    fn grid(n: usize, block: usize) -> Result<usize> {
        if block == 0 || n == 0 || !n.is_multiple_of(block) || !is_power_of_two(n / block) {
            return Err(Error::InvalidBlock { n, block });
        }
        Ok(n / block)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn block_size(&self) -> usize {
        self.block
    }

    /// Blocks per side (`n / block`).
    pub fn grid_size(&self) -> usize {
        self.grid
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn blocks(&self) -> &[(usize, usize)] {
        &self.blocks
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Scalar entries covered by the mask.
    pub fn nnz(&self) -> usize {
        self.blocks.len() * self.block * self.block
    }

    /// Nonzeros per scalar row.
    pub fn row_nnz(&self) -> usize {
        self.block * (1 + self.levels)
    }

    pub fn contains(&self, block_row: usize, block_col: usize) -> bool {
        block_row < self.grid
            && self.blocks[self.row_ptr[block_row]..self.row_ptr[block_row + 1]]
                .binary_search(&(block_row, block_col))
                .is_ok()
    }

    /// Scalar density `nnz / n²`.
    pub fn density(&self) -> f64 {
        self.nnz() as f64 / (self.n * self.n) as f64
    }
}
