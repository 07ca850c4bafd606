use crate::butterfly::FftPlan;
use crate::layer::{add_bias_rows, bias_grad, check_input, Gradients, Layer};
use crate::tensor::{is_power_of_two, Complex64, DenseMatrix, Rng, Scalar};
use crate::{Error, Result};

/// Largest imaginary residue, relative to the output scale, tolerated when
/// taking the real part of an inverse transform.
const IMAG_TOL: f64 = 1e-9;

/// Circulant layer `y[i] = Σ_j c[(i - j) mod n]·x[j] + b[i]`.
///
/// Power-of-two sizes use the butterfly FFT; other sizes fall back to the
/// direct `O(n²)` sum.
#[derive(Clone, Debug)]
pub struct CirculantLayer<T> {
    c: Vec<T>,
    bias: Option<Vec<T>>,
    plan: Option<FftPlan>,
}

impl<T: PartialEq> PartialEq for CirculantLayer<T> {
    fn eq(&self, other: &Self) -> bool {
        self.c == other.c && self.bias == other.bias
    }
}

#[derive(Clone, Debug)]
pub struct CirculantCache<T> {
    x: DenseMatrix<T>,
}

#[derive(Clone, Debug)]
pub struct CirculantGrads<T> {
    pub c: Vec<T>,
    pub bias: Option<Vec<T>>,
    pub input: DenseMatrix<T>,
}

impl<T> Gradients<T> for CirculantGrads<T> {
    fn params(&self) -> Vec<&[T]> {
        let mut out = vec![self.c.as_slice()];
        out.extend(self.bias.as_deref());
        out
    }

    fn input(&self) -> &DenseMatrix<T> {
        &self.input
    }
}

fn to_complex<T: Scalar>(x: &[T]) -> Vec<Complex64> {
    x.iter().map(|v| Complex64::new(v.to_f64(), 0.0)).collect()
}

fn real_part<T: Scalar>(z: &[Complex64]) -> Vec<T> {
    let scale = z.iter().map(|v| v.re.abs()).fold(1.0, f64::max);
    let resid = z.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    assert!(
        resid <= IMAG_TOL * scale,
        "imaginary residue {resid:e} of a real circulant product"
    );
    z.iter().map(|v| T::from_f64(v.re)).collect()
}

impl<T: Scalar> CirculantLayer<T> {
    /// `c ~ U(±1/√n)`, zero bias.
    pub fn new(n: usize, bias: bool, rng: &mut Rng) -> Result<Self> {
        let a = 1.0 / (n.max(1) as f64).sqrt();
        let c = (0..n).map(|_| T::from_f64(rng.uniform(-a, a))).collect();
        Self::from_column(c, bias.then(|| vec![T::zero(); n]))
    }

    /// Layer whose matrix has first column `c`.
    pub fn from_column(c: Vec<T>, bias: Option<Vec<T>>) -> Result<Self> {
        let n = c.len();
        if n == 0 {
            return Err(Error::InvalidArgument("circulant size must be positive".into()));
        }
        if bias.as_ref().is_some_and(|b| b.len() != n) {
            return Err(Error::InvalidArgument(format!("bias must have {n} entries")));
        }
        let plan = if is_power_of_two(n) {
            Some(FftPlan::new(n)?)
        } else {
            None
        };
        Ok(Self { c, bias, plan })
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn column(&self) -> &[T] {
        &self.c
    }

    pub fn bias(&self) -> Option<&[T]> {
        self.bias.as_deref()
    }

    pub fn uses_fft(&self) -> bool {
        self.plan.is_some()
    }

    /// Explicit `n × n` circulant matrix.
    pub fn dense_reconstruct(&self) -> DenseMatrix<T> {
        let n = self.n();
        DenseMatrix::from_fn(n, n, |i, j| self.c[(i + n - j) % n])
    }

    /// Row-wise `out = a ⊛ x` (`conj_a`: correlate with `a` instead) over a batch.
    fn convolve_rows(&self, a: &[T], x: &DenseMatrix<T>, conj_a: bool) -> Result<DenseMatrix<T>> {
        let n = self.n();
        let mut out = DenseMatrix::zeros(x.rows(), n);
        match &self.plan {
            Some(plan) => {
                let mut fa = plan.forward(&to_complex(a))?;
                if conj_a {
                    fa.iter_mut().for_each(|v| *v = v.conj());
                }
                for r in 0..x.rows() {
                    let mut fx = plan.forward(&to_complex(x.row(r)))?;
                    fx.iter_mut().zip(&fa).for_each(|(v, w)| *v *= w);
                    out.row_mut(r).copy_from_slice(&real_part::<T>(&plan.inverse(&fx)?));
                }
            }
            None => {
                for r in 0..x.rows() {
                    let (xr, yr) = (x.row(r), out.row_mut(r));
                    for (i, yi) in yr.iter_mut().enumerate() {
                        let mut acc = T::zero();
                        for (j, &xj) in xr.iter().enumerate() {
                            let k = if conj_a { (j + n - i) % n } else { (i + n - j) % n };
                            acc += a[k] * xj;
                        }
                        *yi = acc;
                    }
                }
            }
        }
        Ok(out)
    }
}

impl<T: Scalar> Layer<T> for CirculantLayer<T> {
    type Cache = CirculantCache<T>;
    type Grads = CirculantGrads<T>;

    fn in_dim(&self) -> usize {
        self.n()
    }

    fn out_dim(&self) -> usize {
        self.n()
    }

    fn forward(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        check_input("circulant_forward", x, self.n())?;
        let mut y = self.convolve_rows(&self.c, x, false)?;
        add_bias_rows(&mut y, self.bias.as_deref());
        Ok(y)
    }

    fn forward_cached(&self, x: &DenseMatrix<T>) -> Result<(DenseMatrix<T>, Self::Cache)> {
        let y = self.forward(x)?;
        Ok((y, CirculantCache { x: x.clone() }))
    }

    /// `dc[k] = Σ_i dy[i]·x[(i - k) mod n]`, `dx = Cᵀ·dy`.
    fn backward(&self, cache: &Self::Cache, dy: &DenseMatrix<T>) -> Result<Self::Grads> {
        check_input("circulant_backward", dy, self.n())?;
        if dy.rows() != cache.x.rows() {
            return Err(Error::ShapeMismatch {
                op: "circulant_backward",
                lhs: cache.x.shape(),
                rhs: dy.shape(),
            });
        }
        let n = self.n();
        let input = self.convolve_rows(&self.c, dy, true)?;
        let mut c = vec![T::zero(); n];
        for r in 0..dy.rows() {
            let single = DenseMatrix::from_vec(1, n, dy.row(r).to_vec())?;
            let g = self.convolve_rows(cache.x.row(r), &single, true)?;
            for (acc, &v) in c.iter_mut().zip(g.row(0)) {
                *acc += v;
            }
        }
        Ok(CirculantGrads {
            c,
            bias: self.bias.as_ref().map(|_| bias_grad(dy)),
            input,
        })
    }

    fn params(&self) -> Vec<&[T]> {
        let mut out = vec![self.c.as_slice()];
        out.extend(self.bias.as_deref());
        out
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = vec![self.c.as_mut_slice()];
        out.extend(self.bias.as_deref_mut());
        out
    }

    fn param_count(&self) -> usize {
        self.n() + if self.bias.is_some() { self.n() } else { 0 }
    }
}
