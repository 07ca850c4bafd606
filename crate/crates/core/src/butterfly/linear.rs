use super::{bit_reversal_permutation, ButterflyCache, ButterflyInit, ButterflyLayer};
use crate::layer::{add_bias_rows, bias_grad, check_input, Gradients, Layer};
use crate::tensor::{DenseMatrix, Rng, Scalar};
use crate::Result;

/// Butterfly layer of arbitrary shape `in_dim → out_dim`.
///
/// Inputs are zero-padded to the next power of two `n ≥ max(in, out)` and the
/// output is truncated to `out_dim`. The inner layer uses the bit-reversal
/// permutation; the output bias has `out_dim` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct ButterflyLinear<T> {
    in_dim: usize,
    out_dim: usize,
    inner: ButterflyLayer<T>,
    bias: Option<Vec<T>>,
}

#[derive(Clone, Debug)]
pub struct ButterflyLinearCache<T> {
    inner: ButterflyCache<T>,
}

#[derive(Clone, Debug)]
pub struct ButterflyLinearGrads<T> {
    pub levels: Vec<Vec<T>>,
    pub bias: Option<Vec<T>>,
    pub input: DenseMatrix<T>,
}

impl<T> Gradients<T> for ButterflyLinearGrads<T> {
    fn params(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = self.levels.iter().map(Vec::as_slice).collect();
        out.extend(self.bias.as_deref());
        out
    }

    fn input(&self) -> &DenseMatrix<T> {
        &self.input
    }
}

impl<T: Scalar> ButterflyLinear<T> {
    pub fn new(in_dim: usize, out_dim: usize, bias: bool, init: ButterflyInit, rng: &mut Rng) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(crate::Error::InvalidArgument(
                "butterfly dimensions must be positive".into(),
            ));
        }
        let n = in_dim.max(out_dim).next_power_of_two();
        let inner = ButterflyLayer::new(n, init, rng)?.with_permutation(bit_reversal_permutation(n)?)?;
        Ok(Self {
            in_dim,
            out_dim,
            inner,
            bias: bias.then(|| vec![T::zero(); out_dim]),
        })
    }

    /// Wrap an existing square layer (no padding, or padding chosen by the caller).
    pub fn from_inner(in_dim: usize, out_dim: usize, inner: ButterflyLayer<T>, bias: Option<Vec<T>>) -> Result<Self> {
        if in_dim > inner.n() || out_dim > inner.n() || bias.as_ref().is_some_and(|b| b.len() != out_dim) {
            return Err(crate::Error::InvalidArgument(format!(
                "cannot wrap a size-{} butterfly as {in_dim} -> {out_dim}",
                inner.n()
            )));
        }
        Ok(Self {
            in_dim,
            out_dim,
            inner,
            bias,
        })
    }

    pub fn inner(&self) -> &ButterflyLayer<T> {
        &self.inner
    }

    pub fn inner_mut(&mut self) -> &mut ButterflyLayer<T> {
        &mut self.inner
    }

    pub fn padded_size(&self) -> usize {
        self.inner.n()
    }

    pub fn bias(&self) -> Option<&[T]> {
        self.bias.as_deref()
    }

    fn pad(&self, x: &DenseMatrix<T>, width: usize) -> DenseMatrix<T> {
        if x.cols() == self.inner.n() {
            return x.clone();
        }
        let mut p = DenseMatrix::zeros(x.rows(), self.inner.n());
        for r in 0..x.rows() {
            p.row_mut(r)[..width].copy_from_slice(x.row(r));
        }
        p
    }

    fn truncate(m: &DenseMatrix<T>, width: usize) -> DenseMatrix<T> {
        if m.cols() == width {
            return m.clone();
        }
        DenseMatrix::from_fn(m.rows(), width, |r, c| m.get(r, c))
    }
}

impl<T: Scalar> Layer<T> for ButterflyLinear<T> {
    type Cache = ButterflyLinearCache<T>;
    type Grads = ButterflyLinearGrads<T>;

    fn in_dim(&self) -> usize {
        self.in_dim
    }

    fn out_dim(&self) -> usize {
        self.out_dim
    }

    fn forward(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        check_input("butterfly_linear", x, self.in_dim)?;
        let mut y = Self::truncate(&self.inner.apply(&self.pad(x, self.in_dim))?, self.out_dim);
        add_bias_rows(&mut y, self.bias.as_deref());
        Ok(y)
    }

    fn forward_cached(&self, x: &DenseMatrix<T>) -> Result<(DenseMatrix<T>, Self::Cache)> {
        check_input("butterfly_linear", x, self.in_dim)?;
        let (full, inner) = self.inner.forward_cached(&self.pad(x, self.in_dim))?;
        let mut y = Self::truncate(&full, self.out_dim);
        add_bias_rows(&mut y, self.bias.as_deref());
        Ok((y, ButterflyLinearCache { inner }))
    }

    fn backward(&self, cache: &Self::Cache, dy: &DenseMatrix<T>) -> Result<Self::Grads> {
        check_input("butterfly_linear_backward", dy, self.out_dim)?;
        let g = self.inner.backward(&cache.inner, &self.pad(dy, self.out_dim))?;
        Ok(ButterflyLinearGrads {
            levels: g.levels,
            bias: self.bias.as_ref().map(|_| bias_grad(dy)),
            input: Self::truncate(&g.input, self.in_dim),
        })
    }

    fn params(&self) -> Vec<&[T]> {
        let mut out = self.inner.params();
        out.extend(self.bias.as_deref());
        out
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = self.inner.params_mut();
        out.extend(self.bias.as_deref_mut());
        out
    }

    fn param_count(&self) -> usize {
        self.inner.structural_param_count() + if self.bias.is_some() { self.out_dim } else { 0 }
    }
}
