use super::walsh_hadamard_in_place;
use crate::butterfly::Permutation;
use crate::layer::{add_bias_rows, bias_grad, check_input, Gradients, Layer};
use crate::tensor::{is_power_of_two, DenseMatrix, Rng, Scalar};
use crate::{Error, Result};

/// Fastfood transform `y = (1/√n)·S·H·G·Π·H·B·x + b`.
///
/// `H` is the unnormalized Walsh–Hadamard transform, `S`, `G` and `B` are
/// learnable diagonals and `Π` is a fixed permutation.
#[derive(Clone, Debug, PartialEq)]
pub struct FastfoodLayer<T> {
    s: Vec<T>,
    g: Vec<T>,
    b: Vec<T>,
    perm: Permutation,
    bias: Option<Vec<T>>,
}

#[derive(Clone, Debug)]
pub struct FastfoodCache<T> {
    x: DenseMatrix<T>,
    /// `H·B·x` per sample.
    first: DenseMatrix<T>,
    /// `H·G·Π·H·B·x` per sample.
    second: DenseMatrix<T>,
}

#[derive(Clone, Debug)]
pub struct FastfoodGrads<T> {
    pub s: Vec<T>,
    pub g: Vec<T>,
    pub b: Vec<T>,
    pub bias: Option<Vec<T>>,
    pub input: DenseMatrix<T>,
}

impl<T> Gradients<T> for FastfoodGrads<T> {
    fn params(&self) -> Vec<&[T]> {
        let mut out = vec![self.s.as_slice(), self.g.as_slice(), self.b.as_slice()];
        out.extend(self.bias.as_deref());
        out
    }

    fn input(&self) -> &DenseMatrix<T> {
        &self.input
    }
}

impl<T: Scalar> FastfoodLayer<T> {
    /// `B` random signs, `G ~ N(0, 1)`, `Π` uniform, `S = 1/‖G‖` so the
    /// transform roughly preserves norms; zero bias.
    pub fn new(n: usize, bias: bool, rng: &mut Rng) -> Result<Self> {
        if !is_power_of_two(n) {
            return Err(Error::NotPowerOfTwo(n));
        }
        let b: Vec<T> = (0..n)
            .map(|_| T::from_f64(if rng.coin() { 1.0 } else { -1.0 }))
            .collect();
        let perm = Permutation::random(n, rng);
        let g64: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let norm = g64.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let g = g64.iter().map(|&v| T::from_f64(v)).collect();
        let s = vec![T::from_f64(1.0 / norm); n];
        Self::from_parts(s, g, b, perm, bias.then(|| vec![T::zero(); n]))
    }

    pub fn from_parts(s: Vec<T>, g: Vec<T>, b: Vec<T>, perm: Permutation, bias: Option<Vec<T>>) -> Result<Self> {
        let n = s.len();
        if !is_power_of_two(n) {
            return Err(Error::NotPowerOfTwo(n));
        }
        if g.len() != n || b.len() != n || perm.len() != n || bias.as_ref().is_some_and(|v| v.len() != n) {
            return Err(Error::InvalidArgument(format!(
                "fastfood parts must all have length {n}"
            )));
        }
        Ok(Self { s, g, b, perm, bias })
    }

    pub fn n(&self) -> usize {
        self.s.len()
    }

    pub fn permutation(&self) -> &Permutation {
        &self.perm
    }

    pub fn set_permutation(&mut self, perm: Permutation) -> Result<()> {
        if perm.len() != self.n() {
            return Err(Error::InvalidArgument(format!(
                "permutation of length {} for n = {}",
                perm.len(),
                self.n()
            )));
        }
        self.perm = perm;
        Ok(())
    }

    pub fn bias(&self) -> Option<&[T]> {
        self.bias.as_deref()
    }

    fn scale(&self) -> T {
        T::from_f64(1.0 / (self.n() as f64).sqrt())
    }

    /// Returns `(y, H·B·x, H·G·Π·H·B·x)` for one sample.
    fn sample(&self, x: &[T], y: &mut [T], first: &mut [T], second: &mut [T]) {
        for ((f, &xi), &bi) in first.iter_mut().zip(x).zip(&self.b) {
            *f = bi * xi;
        }
        walsh_hadamard_in_place(first).expect("size checked at construction");
        self.perm.gather(first, second);
        for (v, &gi) in second.iter_mut().zip(&self.g) {
            *v *= gi;
        }
        walsh_hadamard_in_place(second).expect("size checked at construction");
        let k = self.scale();
        for ((yi, &h), &si) in y.iter_mut().zip(second.iter()).zip(&self.s) {
            *yi = k * si * h;
        }
    }

    fn run(&self, x: &DenseMatrix<T>) -> Result<(DenseMatrix<T>, DenseMatrix<T>, DenseMatrix<T>)> {
        check_input("fastfood_forward", x, self.n())?;
        let (rows, n) = (x.rows(), self.n());
        let mut y = DenseMatrix::zeros(rows, n);
        let mut first = DenseMatrix::zeros(rows, n);
        let mut second = DenseMatrix::zeros(rows, n);
        for r in 0..rows {
            self.sample(x.row(r), y.row_mut(r), first.row_mut(r), second.row_mut(r));
        }
        add_bias_rows(&mut y, self.bias.as_deref());
        Ok((y, first, second))
    }
}

impl<T: Scalar> Layer<T> for FastfoodLayer<T> {
    type Cache = FastfoodCache<T>;
    type Grads = FastfoodGrads<T>;

    fn in_dim(&self) -> usize {
        self.n()
    }

    fn out_dim(&self) -> usize {
        self.n()
    }

    fn forward(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        Ok(self.run(x)?.0)
    }

    fn forward_cached(&self, x: &DenseMatrix<T>) -> Result<(DenseMatrix<T>, Self::Cache)> {
        let (y, first, second) = self.run(x)?;
        Ok((
            y,
            FastfoodCache {
                x: x.clone(),
                first,
                second,
            },
        ))
    }

    fn backward(&self, cache: &Self::Cache, dy: &DenseMatrix<T>) -> Result<Self::Grads> {
        check_input("fastfood_backward", dy, self.n())?;
        if dy.rows() != cache.x.rows() {
            return Err(Error::ShapeMismatch {
                op: "fastfood_backward",
                lhs: cache.x.shape(),
                rhs: dy.shape(),
            });
        }
        let n = self.n();
        let k = self.scale();
        let (mut ds, mut dg, mut db) = (vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]);
        let mut input = DenseMatrix::zeros(dy.rows(), n);
        let mut buf = vec![T::zero(); n];
        let mut permuted = vec![T::zero(); n];
        for r in 0..dy.rows() {
            let (dyr, second, first, xr) = (dy.row(r), cache.second.row(r), cache.first.row(r), cache.x.row(r));
            for i in 0..n {
                ds[i] += dyr[i] * k * second[i];
                buf[i] = dyr[i] * k * self.s[i];
            }
            walsh_hadamard_in_place(&mut buf)?;
            self.perm.gather(first, &mut permuted);
            for i in 0..n {
                dg[i] += buf[i] * permuted[i];
                buf[i] *= self.g[i];
            }
            let dxr = input.row_mut(r);
            self.perm.scatter(&buf, dxr);
            walsh_hadamard_in_place(dxr)?;
            for i in 0..n {
                db[i] += dxr[i] * xr[i];
                dxr[i] *= self.b[i];
            }
        }
        Ok(FastfoodGrads {
            s: ds,
            g: dg,
            b: db,
            bias: self.bias.as_ref().map(|_| bias_grad(dy)),
            input,
        })
    }

    fn params(&self) -> Vec<&[T]> {
        let mut out = vec![self.s.as_slice(), self.g.as_slice(), self.b.as_slice()];
        out.extend(self.bias.as_deref());
        out
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = vec![self.s.as_mut_slice(), self.g.as_mut_slice(), self.b.as_mut_slice()];
        out.extend(self.bias.as_deref_mut());
        out
    }

    fn param_count(&self) -> usize {
        3 * self.n() + if self.bias.is_some() { self.n() } else { 0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::gradient_check;

    fn ones(n: usize) -> FastfoodLayer<f64> {
        FastfoodLayer::from_parts(vec![1.0; n], vec![1.0; n], vec![1.0; n], Permutation::identity(n), None).unwrap()
    }

    #[test]
    fn unit_diagonals_scale_by_sqrt_n() {
        let l = ones(16);
        let x = DenseMatrix::from_fn(2, 16, |r, c| (r as f64) - (c as f64) * 0.5);
        let y = l.forward(&x).unwrap();
        for (a, b) in y.as_slice().iter().zip(x.as_slice()) {
            assert!((a - 4.0 * b).abs() <= 1e-12);
        }
    }

    #[test]
    fn two_point_hand_case() {
        // H·x = [3, -1], H again = [2, 4], times 1/√2
        let y = ones(2)
            .forward(&DenseMatrix::from_vec(1, 2, vec![1.0, 2.0]).unwrap())
            .unwrap();
        let r = std::f64::consts::SQRT_2;
        assert!((y.get(0, 0) - 2.0 / r).abs() < 1e-15);
        assert!((y.get(0, 1) - 4.0 / r).abs() < 1e-15);
    }

    #[test]
    fn gradients_match_differences() {
        let mut rng = Rng::seed_from_u64(0);
        for n in [2usize, 16, 64] {
            let l = FastfoodLayer::<f64>::new(n, true, &mut rng).unwrap();
            assert!(gradient_check(&l, 2, &mut rng).unwrap().max() <= 1e-5, "n={n}");
        }
    }

    #[test]
    fn param_count_excludes_permutation() {
        let mut rng = Rng::seed_from_u64(1);
        let l = FastfoodLayer::<f32>::new(1024, true, &mut rng).unwrap();
        assert_eq!(l.param_count(), 4096);
        assert_eq!(l.allocated_params(), 4096);
        assert!(FastfoodLayer::<f32>::new(12, false, &mut rng).is_err());
    }
}
