//! Common interface of every trainable linear layer.

use crate::tensor::{DenseMatrix, Scalar};
use crate::Result;

/// Gradients returned by [`Layer::backward`].
pub trait Gradients<T> {
    /// Parameter gradients, in the same order and shapes as [`Layer::params`].
    fn params(&self) -> Vec<&[T]>;
    /// Gradient with respect to the layer input (`batch × in_dim`).
    fn input(&self) -> &DenseMatrix<T>;
}

/// A batched linear operator with learnable parameters.
///
/// Batches are `batch × dim` matrices, one sample per row. `forward_cached`
/// returns whatever `backward` needs; parameter gradients are summed over the
/// batch in ascending sample order.
pub trait Layer<T: Scalar>: Clone + Send + Sync {
    type Cache: Send;
    type Grads: Gradients<T>;

    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;

    fn forward(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>>;
    fn forward_cached(&self, x: &DenseMatrix<T>) -> Result<(DenseMatrix<T>, Self::Cache)>;
    fn backward(&self, cache: &Self::Cache, dy: &DenseMatrix<T>) -> Result<Self::Grads>;

    fn params(&self) -> Vec<&[T]>;
    fn params_mut(&mut self) -> Vec<&mut [T]>;

    /// Learnable scalar count from the layer configuration (closed form).
    fn param_count(&self) -> usize;

    /// Learnable scalars actually allocated.
    fn allocated_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

pub(crate) fn check_input<T: Scalar>(op: &'static str, x: &DenseMatrix<T>, dim: usize) -> Result<()> {
    if x.cols() != dim {
        return Err(crate::Error::ShapeMismatch {
            op,
            lhs: (x.rows(), dim),
            rhs: x.shape(),
        });
    }
    Ok(())
}

pub(crate) fn add_bias_rows<T: Scalar>(y: &mut DenseMatrix<T>, bias: Option<&[T]>) {
    if let Some(b) = bias {
        for r in 0..y.rows() {
            for (v, &bv) in y.row_mut(r).iter_mut().zip(b) {
                *v += bv;
            }
        }
    }
}

/// Column sums of `dy` accumulated over ascending rows.
pub(crate) fn bias_grad<T: Scalar>(dy: &DenseMatrix<T>) -> Vec<T> {
    let mut g = vec![T::zero(); dy.cols()];
    for row in dy.row_iter() {
        for (acc, &v) in g.iter_mut().zip(row) {
            *acc += v;
        }
    }
    g
}
