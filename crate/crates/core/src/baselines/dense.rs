use crate::layer::{add_bias_rows, bias_grad, check_input, Gradients, Layer};
use crate::tensor::{DenseMatrix, Field, Rng, Scalar};
use crate::{Error, Result};

/// Fully connected `y = W·x + b` with `W` stored `out × in`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLinear<T> {
    weight: DenseMatrix<T>,
    bias: Option<Vec<T>>,
}

#[derive(Clone, Debug)]
pub struct DenseCache<T> {
    x: DenseMatrix<T>,
}

#[derive(Clone, Debug)]
pub struct DenseGrads<T> {
    pub weight: DenseMatrix<T>,
    pub bias: Option<Vec<T>>,
    pub input: DenseMatrix<T>,
}

impl<T: Field> Gradients<T> for DenseGrads<T> {
    fn params(&self) -> Vec<&[T]> {
        let mut out = vec![self.weight.as_slice()];
        out.extend(self.bias.as_deref());
        out
    }

    fn input(&self) -> &DenseMatrix<T> {
        &self.input
    }
}

impl<T: Scalar> DenseLinear<T> {
    /// Weights `~ U(±1/√in)`, zero bias.
    pub fn new(in_dim: usize, out_dim: usize, bias: bool, rng: &mut Rng) -> Self {
        let a = 1.0 / (in_dim.max(1) as f64).sqrt();
        Self {
            weight: DenseMatrix::random_uniform(out_dim, in_dim, -a, a, rng),
            bias: bias.then(|| vec![T::zero(); out_dim]),
        }
    }

    pub fn from_weight(weight: DenseMatrix<T>, bias: Option<Vec<T>>) -> Result<Self> {
        if bias.as_ref().is_some_and(|b| b.len() != weight.rows()) {
            return Err(Error::InvalidArgument(format!(
                "bias must have {} entries",
                weight.rows()
            )));
        }
        Ok(Self { weight, bias })
    }

    pub fn weight(&self) -> &DenseMatrix<T> {
        &self.weight
    }

    pub fn weight_mut(&mut self) -> &mut DenseMatrix<T> {
        &mut self.weight
    }

    pub fn bias(&self) -> Option<&[T]> {
        self.bias.as_deref()
    }

    pub fn bias_mut(&mut self) -> Option<&mut [T]> {
        self.bias.as_deref_mut()
    }
}

impl<T: Scalar> Layer<T> for DenseLinear<T> {
    type Cache = DenseCache<T>;
    type Grads = DenseGrads<T>;

    fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    fn forward(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        check_input("dense_forward", x, self.in_dim())?;
        let mut y = x.matmul_nt(&self.weight)?;
        add_bias_rows(&mut y, self.bias.as_deref());
        Ok(y)
    }

    fn forward_cached(&self, x: &DenseMatrix<T>) -> Result<(DenseMatrix<T>, Self::Cache)> {
        let y = self.forward(x)?;
        Ok((y, DenseCache { x: x.clone() }))
    }

    fn backward(&self, cache: &Self::Cache, dy: &DenseMatrix<T>) -> Result<Self::Grads> {
        check_input("dense_backward", dy, self.out_dim())?;
        Ok(DenseGrads {
            weight: dy.matmul_tn(&cache.x)?,
            bias: self.bias.as_ref().map(|_| bias_grad(dy)),
            input: dy.matmul(&self.weight)?,
        })
    }

    fn params(&self) -> Vec<&[T]> {
        let mut out = vec![self.weight.as_slice()];
        out.extend(self.bias.as_deref());
        out
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = vec![self.weight.as_mut_slice()];
        out.extend(self.bias.as_deref_mut());
        out
    }

    fn param_count(&self) -> usize {
        self.in_dim() * self.out_dim() + if self.bias.is_some() { self.out_dim() } else { 0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::gradient_check;

    #[test]
    fn identity_weight() {
        let l = DenseLinear::from_weight(DenseMatrix::<f64>::identity(5), Some(vec![0.0; 5])).unwrap();
        let x = DenseMatrix::from_fn(3, 5, |r, c| (r * 5 + c) as f64);
        assert_eq!(l.forward(&x).unwrap(), x);
    }

    #[test]
    fn gradients_match_differences() {
        let mut rng = Rng::seed_from_u64(0);
        let mut l = DenseLinear::<f64>::new(16, 16, true, &mut rng);
        l.bias_mut().unwrap().fill(0.3);
        assert!(gradient_check(&l, 3, &mut rng).unwrap().max() <= 1e-5);
        let l = DenseLinear::<f64>::new(7, 3, false, &mut rng);
        assert!(gradient_check(&l, 2, &mut rng).unwrap().max() <= 1e-5);
    }

    #[test]
    fn param_counts() {
        let mut rng = Rng::seed_from_u64(1);
        let l = DenseLinear::<f32>::new(1024, 1024, true, &mut rng);
        assert_eq!(l.param_count(), 1049600);
        assert_eq!(l.allocated_params(), 1049600);
        assert_eq!(DenseLinear::<f32>::new(1024, 10, true, &mut rng).param_count(), 10250);
    }

    #[test]
    fn shape_mismatch() {
        let mut rng = Rng::seed_from_u64(2);
        let l = DenseLinear::<f64>::new(4, 2, false, &mut rng);
        assert!(l.forward(&DenseMatrix::zeros(1, 3)).is_err());
    }
}
