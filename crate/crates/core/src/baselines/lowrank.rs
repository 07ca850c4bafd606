use crate::layer::{add_bias_rows, bias_grad, check_input, Gradients, Layer};
use crate::tensor::{DenseMatrix, Field, Rng, Scalar};
use crate::{Error, Result};

/// `y = U·(V·x) + b` with `U` `out × r` and `V` `r × in`.
#[derive(Clone, Debug, PartialEq)]
pub struct LowRankLayer<T> {
    u: DenseMatrix<T>,
    v: DenseMatrix<T>,
    bias: Option<Vec<T>>,
}

#[derive(Clone, Debug)]
pub struct LowRankCache<T> {
    x: DenseMatrix<T>,
    /// `X·Vᵀ`, `batch × r`.
    low: DenseMatrix<T>,
}

#[derive(Clone, Debug)]
pub struct LowRankGrads<T> {
    pub u: DenseMatrix<T>,
    pub v: DenseMatrix<T>,
    pub bias: Option<Vec<T>>,
    pub input: DenseMatrix<T>,
}

impl<T: Field> Gradients<T> for LowRankGrads<T> {
    fn params(&self) -> Vec<&[T]> {
        let mut out = vec![self.u.as_slice(), self.v.as_slice()];
        out.extend(self.bias.as_deref());
        out
    }

    fn input(&self) -> &DenseMatrix<T> {
        &self.input
    }
}

impl<T: Scalar> LowRankLayer<T> {
    /// `U ~ U(±1/√r)`, `V ~ U(±1/√in)`, zero bias.
    pub fn new(in_dim: usize, out_dim: usize, rank: usize, bias: bool, rng: &mut Rng) -> Result<Self> {
        if rank > in_dim.min(out_dim) {
            return Err(Error::InvalidArgument(format!(
                "rank {rank} exceeds min({in_dim}, {out_dim})"
            )));
        }
        let a = 1.0 / (rank.max(1) as f64).sqrt();
        let b = 1.0 / (in_dim.max(1) as f64).sqrt();
        Ok(Self {
            u: DenseMatrix::random_uniform(out_dim, rank, -a, a, rng),
            v: DenseMatrix::random_uniform(rank, in_dim, -b, b, rng),
            bias: bias.then(|| vec![T::zero(); out_dim]),
        })
    }

    pub fn from_factors(u: DenseMatrix<T>, v: DenseMatrix<T>, bias: Option<Vec<T>>) -> Result<Self> {
        if u.cols() != v.rows() {
            return Err(Error::ShapeMismatch {
                op: "lowrank_factors",
                lhs: u.shape(),
                rhs: v.shape(),
            });
        }
        if bias.as_ref().is_some_and(|b| b.len() != u.rows()) {
            return Err(Error::InvalidArgument(format!("bias must have {} entries", u.rows())));
        }
        Ok(Self { u, v, bias })
    }

    pub fn rank(&self) -> usize {
        self.u.cols()
    }

    pub fn factors(&self) -> (&DenseMatrix<T>, &DenseMatrix<T>) {
        (&self.u, &self.v)
    }

    pub fn bias(&self) -> Option<&[T]> {
        self.bias.as_deref()
    }

    /// `U·V` as a dense `out × in` matrix.
    pub fn dense_reconstruct(&self) -> DenseMatrix<T> {
        self.u.matmul(&self.v).expect("factor shapes agree")
    }

    fn forward_inner(&self, x: &DenseMatrix<T>) -> Result<(DenseMatrix<T>, DenseMatrix<T>)> {
        check_input("lowrank_forward", x, self.v.cols())?;
        let low = x.matmul_nt(&self.v)?;
        let mut y = low.matmul_nt(&self.u)?;
        add_bias_rows(&mut y, self.bias.as_deref());
        Ok((y, low))
    }
}

impl<T: Scalar> Layer<T> for LowRankLayer<T> {
    type Cache = LowRankCache<T>;
    type Grads = LowRankGrads<T>;

    fn in_dim(&self) -> usize {
        self.v.cols()
    }

    fn out_dim(&self) -> usize {
        self.u.rows()
    }

    fn forward(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        Ok(self.forward_inner(x)?.0)
    }

    fn forward_cached(&self, x: &DenseMatrix<T>) -> Result<(DenseMatrix<T>, Self::Cache)> {
        let (y, low) = self.forward_inner(x)?;
        Ok((y, LowRankCache { x: x.clone(), low }))
    }

    fn backward(&self, cache: &Self::Cache, dy: &DenseMatrix<T>) -> Result<Self::Grads> {
        check_input("lowrank_backward", dy, self.out_dim())?;
        let dlow = dy.matmul(&self.u)?;
        Ok(LowRankGrads {
            u: dy.matmul_tn(&cache.low)?,
            v: dlow.matmul_tn(&cache.x)?,
            bias: self.bias.as_ref().map(|_| bias_grad(dy)),
            input: dlow.matmul(&self.v)?,
        })
    }

    fn params(&self) -> Vec<&[T]> {
        let mut out = vec![self.u.as_slice(), self.v.as_slice()];
        out.extend(self.bias.as_deref());
        out
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = vec![self.u.as_mut_slice(), self.v.as_mut_slice()];
        out.extend(self.bias.as_deref_mut());
        out
    }

    fn param_count(&self) -> usize {
        self.rank() * (self.in_dim() + self.out_dim()) + if self.bias.is_some() { self.out_dim() } else { 0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::DenseLinear;
    use crate::verify::gradient_check;

    #[test]
    fn rank_zero_is_bias_only() {
        let mut rng = Rng::seed_from_u64(0);
        let mut l = LowRankLayer::<f64>::new(6, 4, 0, true, &mut rng).unwrap();
        l.bias = Some(vec![1.0, 2.0, 3.0, 4.0]);
        let y = l
            .forward(&DenseMatrix::random_uniform(2, 6, -1.0, 1.0, &mut rng))
            .unwrap();
        assert_eq!(y.row(0), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(l.param_count(), 4);
    }

    #[test]
    fn equals_dense_product() {
        let mut rng = Rng::seed_from_u64(1);
        let l = LowRankLayer::<f64>::new(20, 12, 5, false, &mut rng).unwrap();
        let dense = DenseLinear::from_weight(l.dense_reconstruct(), None).unwrap();
        let x = DenseMatrix::random_uniform(4, 20, -1.0, 1.0, &mut rng);
        assert!(l.forward(&x).unwrap().rel_err(&dense.forward(&x).unwrap()) <= 1e-12);
    }

    #[test]
    fn param_counts() {
        let mut rng = Rng::seed_from_u64(2);
        assert_eq!(
            LowRankLayer::<f32>::new(1024, 1024, 6, false, &mut rng)
                .unwrap()
                .param_count(),
            12288
        );
        let l = LowRankLayer::<f32>::new(1024, 1024, 6, true, &mut rng).unwrap();
        assert_eq!(l.param_count(), 13312);
        assert_eq!(l.allocated_params(), 13312);
    }

    #[test]
    fn gradients_match_differences() {
        let mut rng = Rng::seed_from_u64(3);
        let l = LowRankLayer::<f64>::new(16, 10, 3, true, &mut rng).unwrap();
        assert!(gradient_check(&l, 3, &mut rng).unwrap().max() <= 1e-5);
    }
}
