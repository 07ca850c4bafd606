use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use serde::{Deserialize, Serialize};

use super::Permutation;
use crate::layer::{check_input, Gradients, Layer};
use crate::tensor::{log2_exact, CsrMatrix, DenseMatrix, Field, Rng, Scalar};
use crate::{Error, Result};

/// Initialization of the `(a, b, c, d)` records.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ButterflyInit {
    /// `(1, 0, 0, 1)` everywhere.
    Identity,
    /// `(cos θ, sin θ, -sin θ, cos θ)` with `θ ~ U[0, 2π)`; every factor is a
    /// rotation so the product is orthogonal.
    #[default]
    Givens,
    /// Every coefficient `~ U(-1/√2, 1/√2)`.
    UniformScaled,
}

/// One butterfly factor: `n/2` mixing records at a fixed stride.
#[derive(Clone, Debug, PartialEq)]
pub struct ButterflyLevel<T> {
    stride: usize,
    coeffs: Vec<T>,
}

impl<T: Field> ButterflyLevel<T> {
    /// `coeffs` holds `n/2` consecutive `(a, b, c, d)` records.
    pub fn new(n: usize, stride: usize, coeffs: Vec<T>) -> Result<Self> {
        if stride == 0 || !n.is_multiple_of(2 * stride) {
            return Err(Error::InvalidArgument(format!("stride {stride} does not fit n = {n}")));
        }
        if coeffs.len() != 2 * n {
            return Err(Error::InvalidArgument(format!(
                "level of size {n} needs {} coefficients, got {}",
                2 * n,
                coeffs.len()
            )));
        }
        Ok(Self { stride, coeffs })
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    /// 1-based position in the factor product (`stride = 2^(index-1)`).
    pub fn level_index(&self) -> usize {
        self.stride.trailing_zeros() as usize + 1
    }

    pub fn num_pairs(&self) -> usize {
        self.coeffs.len() / 4
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [T] {
        &mut self.coeffs
    }

    pub fn record(&self, pair: usize) -> [T; 4] {
        let c = &self.coeffs[4 * pair..4 * pair + 4];
        [c[0], c[1], c[2], c[3]]
    }

    pub fn set_record(&mut self, pair: usize, rec: [T; 4]) {
        self.coeffs[4 * pair..4 * pair + 4].copy_from_slice(&rec);
    }

    /// Indices `(i, j)` mixed by record `pair`.
    #[inline]
    pub fn pair_indices(&self, pair: usize) -> (usize, usize) {
        let s = self.stride;
        let i = (pair / s) * 2 * s + pair % s;
        (i, i + s)
    }

    /// The factor as an explicit sparse matrix (two entries per row).
    pub fn to_csr(&self) -> CsrMatrix<T> {
        let n = 2 * self.num_pairs();
        let mut triplets = Vec::with_capacity(2 * n);
        for p in 0..self.num_pairs() {
            let (i, j) = self.pair_indices(p);
            let [a, b, c, d] = self.record(p);
            triplets.extend([(i, i, a), (i, j, b), (j, i, c), (j, j, d)]);
        }
        CsrMatrix::from_triplets(n, n, &triplets).expect("pair indices lie inside the factor")
    }

    /// In-place application to one vector.
    #[inline]
    fn apply_in_place(&self, v: &mut [T]) {
        let s = self.stride;
        let mut rec = self.coeffs.chunks_exact(4);
        for block in v.chunks_exact_mut(2 * s) {
            let (lo, hi) = block.split_at_mut(s);
            for (xi, xj) in lo.iter_mut().zip(hi.iter_mut()) {
                let c = rec.next().expect("one record per pair");
                let (a, b) = (*xi, *xj);
                *xi = c[0] * a + c[1] * b;
                *xj = c[2] * a + c[3] * b;
            }
        }
    }
}

/// `T = B_k ⋯ B_1 · P` plus an optional bias, over `n = 2^k` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct ButterflyLayer<T> {
    n: usize,
    levels: Vec<ButterflyLevel<T>>,
    permutation: Permutation,
    bias: Option<Vec<T>>,
}

/// Per-level inputs recorded by [`ButterflyLayer::forward_cached`].
#[derive(Clone, Debug)]
pub struct ButterflyCache<T> {
    level_inputs: Vec<DenseMatrix<T>>,
    batch: usize,
}

/// Gradients of a butterfly layer; `levels[l]` mirrors `levels()[l].coeffs()`.
#[derive(Clone, Debug)]
pub struct ButterflyGrads<T> {
    pub levels: Vec<Vec<T>>,
    pub bias: Option<Vec<T>>,
    pub input: DenseMatrix<T>,
}

impl<T> Gradients<T> for ButterflyGrads<T> {
    fn params(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = self.levels.iter().map(Vec::as_slice).collect();
        out.extend(self.bias.as_deref());
        out
    }

    fn input(&self) -> &DenseMatrix<T> {
        &self.input
    }
}

impl<T: Field> ButterflyLayer<T> {
    /// Assemble a layer. Levels must appear in order of increasing stride
    /// `1, 2, 4, …, n/2`.
    pub fn from_levels(
        n: usize,
        levels: Vec<ButterflyLevel<T>>,
        permutation: Permutation,
        bias: Option<Vec<T>>,
    ) -> Result<Self> {
        let depth = log2_exact(n).ok_or(Error::NotPowerOfTwo(n))?;
        if levels.len() != depth {
            return Err(Error::InvalidArgument(format!(
                "n = {n} needs {depth} levels, got {}",
                levels.len()
            )));
        }
        for (l, level) in levels.iter().enumerate() {
            if level.stride != 1 << l || level.coeffs.len() != 2 * n {
                return Err(Error::InvalidArgument(format!(
                    "level {l} has stride {} and {} coefficients",
                    level.stride,
                    level.coeffs.len()
                )));
            }
        }
        if permutation.len() != n {
            return Err(Error::InvalidArgument(format!(
                "permutation of length {} for n = {n}",
                permutation.len()
            )));
        }
        if bias.as_ref().is_some_and(|b| b.len() != n) {
            return Err(Error::InvalidArgument(format!("bias length must be {n}")));
        }
        Ok(Self {
            n,
            levels,
            permutation,
            bias,
        })
    }

    /// Layer built from one record generator, called per pair in level order.
    pub fn from_records(n: usize, mut record: impl FnMut(usize, usize) -> [T; 4]) -> Result<Self> {
        let depth = log2_exact(n).ok_or(Error::NotPowerOfTwo(n))?;
        let levels = (0..depth)
            .map(|l| {
                let stride = 1 << l;
                let coeffs = (0..n / 2).flat_map(|p| record(stride, p)).collect();
                ButterflyLevel::new(n, stride, coeffs)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_levels(n, levels, Permutation::identity(n), None)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_records(n, |_, _| [T::one(), T::zero(), T::zero(), T::one()])
    }

    pub fn with_permutation(mut self, permutation: Permutation) -> Result<Self> {
        self.set_permutation(permutation)?;
        Ok(self)
    }

    pub fn set_permutation(&mut self, permutation: Permutation) -> Result<()> {
        if permutation.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "permutation of length {} for n = {}",
                permutation.len(),
                self.n
            )));
        }
        self.permutation = permutation;
        Ok(())
    }

    pub fn with_bias(mut self, bias: Option<Vec<T>>) -> Result<Self> {
        if bias.as_ref().is_some_and(|b| b.len() != self.n) {
            return Err(Error::InvalidArgument(format!("bias length must be {}", self.n)));
        }
        self.bias = bias;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[ButterflyLevel<T>] {
        &self.levels
    }

    pub fn levels_mut(&mut self) -> &mut [ButterflyLevel<T>] {
        &mut self.levels
    }

    pub fn permutation(&self) -> &Permutation {
        &self.permutation
    }

    pub fn bias(&self) -> Option<&[T]> {
        self.bias.as_deref()
    }

    /// `2·n·log2 n`: four coefficients per pair, `n/2` pairs, `log2 n` levels.
    pub fn structural_param_count(&self) -> usize {
        2 * self.n * self.depth()
    }

    /// Apply to a single vector.
    pub fn apply_vec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.n {
            return Err(Error::ShapeMismatch {
                op: "butterfly_apply",
                lhs: (self.n, self.n),
                rhs: (x.len(), 1),
            });
        }
        let mut v = vec![T::zero(); self.n];
        self.permutation.gather(x, &mut v);
        for level in &self.levels {
            level.apply_in_place(&mut v);
        }
        if let Some(b) = &self.bias {
            for (vi, &bi) in v.iter_mut().zip(b) {
                *vi += bi;
            }
        }
        Ok(v)
    }

    /// Apply to a batch (one vector per row).
    pub fn apply(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        self.check_batch(x)?;
        let mut y = DenseMatrix::zeros(x.rows(), self.n);
        for r in 0..x.rows() {
            let out = y.row_mut(r);
            self.permutation.gather(x.row(r), out);
            for level in &self.levels {
                level.apply_in_place(out);
            }
            if let Some(b) = &self.bias {
                for (vi, &bi) in out.iter_mut().zip(b) {
                    *vi += bi;
                }
            }
        }
        Ok(y)
    }

    pub fn forward_cached(&self, x: &DenseMatrix<T>) -> Result<(DenseMatrix<T>, ButterflyCache<T>)> {
        self.check_batch(x)?;
        let batch = x.rows();
        let mut cur = DenseMatrix::zeros(batch, self.n);
        for r in 0..batch {
            self.permutation.gather(x.row(r), cur.row_mut(r));
        }
        let mut level_inputs = Vec::with_capacity(self.levels.len());
        for level in &self.levels {
            let mut next = cur.clone();
            for r in 0..batch {
                level.apply_in_place(next.row_mut(r));
            }
            level_inputs.push(std::mem::replace(&mut cur, next));
        }
        if let Some(b) = &self.bias {
            for r in 0..batch {
                for (vi, &bi) in cur.row_mut(r).iter_mut().zip(b) {
                    *vi += bi;
                }
            }
        }
        Ok((cur, ButterflyCache { level_inputs, batch }))
    }

    /// Analytic gradients given the cached forward state and `dL/dy`.
    ///
    /// Per pair and sample: `da += dy_i·x_i`, `db += dy_i·x_j`,
    /// `dc += dy_j·x_i`, `dd += dy_j·x_j` with `x` the level input; the
    /// upstream gradient then becomes `dx_i = a·dy_i + c·dy_j`,
    /// `dx_j = b·dy_i + d·dy_j`. After the first level the permutation is
    /// undone.
    pub fn backward(&self, cache: &ButterflyCache<T>, dy: &DenseMatrix<T>) -> Result<ButterflyGrads<T>> {
        if dy.shape() != (cache.batch, self.n) {
            return Err(Error::ShapeMismatch {
                op: "butterfly_backward",
                lhs: (cache.batch, self.n),
                rhs: dy.shape(),
            });
        }
        if cache.level_inputs.len() != self.levels.len() {
            return Err(Error::MissingForwardCache);
        }
        let mut grad = dy.clone();
        let mut level_grads: Vec<Vec<T>> = self.levels.iter().map(|l| vec![T::zero(); l.coeffs.len()]).collect();
        for (l, level) in self.levels.iter().enumerate().rev() {
            let xin = &cache.level_inputs[l];
            let g = &mut level_grads[l];
            for r in 0..cache.batch {
                let xr = xin.row(r);
                let gr = grad.row_mut(r);
                for p in 0..level.num_pairs() {
                    let (i, j) = level.pair_indices(p);
                    let [a, b, c, d] = level.record(p);
                    let (dyi, dyj) = (gr[i], gr[j]);
                    let (xi, xj) = (xr[i], xr[j]);
                    g[4 * p] += dyi * xi;
                    g[4 * p + 1] += dyi * xj;
                    g[4 * p + 2] += dyj * xi;
                    g[4 * p + 3] += dyj * xj;
                    gr[i] = a * dyi + c * dyj;
                    gr[j] = b * dyi + d * dyj;
                }
            }
        }
        let mut input = DenseMatrix::zeros(cache.batch, self.n);
        for r in 0..cache.batch {
            self.permutation.scatter(grad.row(r), input.row_mut(r));
        }
        let bias = self.bias.as_ref().map(|_| column_sums(dy));
        Ok(ButterflyGrads {
            levels: level_grads,
            bias,
            input,
        })
    }

    /// The permutation as an explicit sparse matrix (`P[i][map[i]] = 1`).
    pub fn permutation_csr(&self) -> CsrMatrix<T> {
        let triplets: Vec<(usize, usize, T)> = self
            .permutation
            .map()
            .iter()
            .enumerate()
            .map(|(i, &m)| (i, m, T::one()))
            .collect();
        CsrMatrix::from_triplets(self.n, self.n, &triplets).expect("permutation entries are in range")
    }

    /// `B_k ⋯ B_1 · P` as a dense `n × n` matrix, formed by multiplying the
    /// explicit factor matrices (bias excluded).
    pub fn dense_reconstruct(&self) -> DenseMatrix<T> {
        let mut m = self.permutation_csr().to_dense();
        for level in &self.levels {
            m = level.to_csr().spmm(&m).expect("factor and accumulator are n x n");
        }
        m
    }

    fn check_batch(&self, x: &DenseMatrix<T>) -> Result<()> {
        if x.cols() != self.n {
            return Err(Error::ShapeMismatch {
                op: "butterfly_apply",
                lhs: (x.rows(), self.n),
                rhs: x.shape(),
            });
        }
        Ok(())
    }
}

fn column_sums<T: Field>(m: &DenseMatrix<T>) -> Vec<T> {
    let mut g = vec![T::zero(); m.cols()];
    for row in m.row_iter() {
        for (acc, &v) in g.iter_mut().zip(row) {
            *acc += v;
        }
    }
    g
}

impl<T: Scalar> ButterflyLayer<T> {
    /// Fresh layer over `n` entries with the identity permutation and no bias.
    pub fn new(n: usize, init: ButterflyInit, rng: &mut Rng) -> Result<Self> {
        log2_exact(n).ok_or(Error::NotPowerOfTwo(n))?;
        let f = T::from_f64;
        match init {
            ButterflyInit::Identity => Self::identity(n),
            ButterflyInit::Givens => Self::from_records(n, |_, _| {
                let (s, c) = rng.uniform(0.0, TAU).sin_cos();
                [f(c), f(s), f(-s), f(c)]
            }),
            ButterflyInit::UniformScaled => {
                Self::from_records(n, |_, _| [(); 4].map(|_| f(rng.uniform(-FRAC_1_SQRT_2, FRAC_1_SQRT_2))))
            }
        }
    }
}

impl<T: Scalar> Layer<T> for ButterflyLayer<T> {
    type Cache = ButterflyCache<T>;
    type Grads = ButterflyGrads<T>;

    fn in_dim(&self) -> usize {
        self.n
    }

    fn out_dim(&self) -> usize {
        self.n
    }

    fn forward(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        check_input("butterfly_apply", x, self.n)?;
        self.apply(x)
    }

    fn forward_cached(&self, x: &DenseMatrix<T>) -> Result<(DenseMatrix<T>, Self::Cache)> {
        ButterflyLayer::forward_cached(self, x)
    }

    fn backward(&self, cache: &Self::Cache, dy: &DenseMatrix<T>) -> Result<Self::Grads> {
        ButterflyLayer::backward(self, cache, dy)
    }

    fn params(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = self.levels.iter().map(|l| l.coeffs.as_slice()).collect();
        out.extend(self.bias.as_deref());
        out
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = self.levels.iter_mut().map(|l| l.coeffs.as_mut_slice()).collect();
        out.extend(self.bias.as_deref_mut());
        out
    }

    fn param_count(&self) -> usize {
        self.structural_param_count() + if self.bias.is_some() { self.n } else { 0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{count_ops, Counted};

    fn random_batch(rows: usize, n: usize, rng: &mut Rng) -> DenseMatrix<f64> {
        DenseMatrix::random_uniform(rows, n, -1.0, 1.0, rng)
    }

    #[test]
    fn size_one_is_identity() {
        let mut rng = Rng::seed_from_u64(0);
        let l = ButterflyLayer::<f64>::new(1, ButterflyInit::Givens, &mut rng).unwrap();
        assert_eq!(l.depth(), 0);
        assert_eq!(l.apply_vec(&[2.5]).unwrap(), vec![2.5]);
    }

    #[test]
    fn rejects_non_power_of_two() {
        let mut rng = Rng::seed_from_u64(0);
        let err = ButterflyLayer::<f64>::new(12, ButterflyInit::Identity, &mut rng).unwrap_err();
        assert!(err.to_string().contains("12"));
    }

    #[test]
    fn identity_init_reconstructs_identity() {
        let mut rng = Rng::seed_from_u64(0);
        for n in [4, 8] {
            let l = ButterflyLayer::<f64>::new(n, ButterflyInit::Identity, &mut rng).unwrap();
            assert_eq!(l.dense_reconstruct(), DenseMatrix::identity(n));
            assert!(l.permutation().is_identity());
            let x = random_batch(3, n, &mut rng);
            assert_eq!(l.apply(&x).unwrap(), x);
        }
    }

    #[test]
    fn hand_computed_two_by_two() {
        let level = ButterflyLevel::new(2, 1, vec![1.0, 1.0, 1.0, -1.0]).unwrap();
        let l = ButterflyLayer::from_levels(2, vec![level], Permutation::identity(2), None).unwrap();
        assert_eq!(l.apply_vec(&[3.0, 5.0]).unwrap(), vec![8.0, -2.0]);
    }

    #[test]
    fn one_level_reconstruction_is_the_record() {
        let level = ButterflyLevel::new(2, 1, vec![0.5, -2.0, 3.0, 7.0]).unwrap();
        let l = ButterflyLayer::from_levels(2, vec![level], Permutation::identity(2), None).unwrap();
        assert_eq!(l.dense_reconstruct().as_slice(), &[0.5, -2.0, 3.0, 7.0]);
    }

    #[test]
    fn each_level_has_two_nonzeros_per_row() {
        let mut rng = Rng::seed_from_u64(1);
        let l = ButterflyLayer::<f64>::new(16, ButterflyInit::UniformScaled, &mut rng).unwrap();
        for level in l.levels() {
            let csr = level.to_csr();
            assert_eq!(csr.nnz(), 32);
            assert!(csr.row_ptr().windows(2).all(|w| w[1] - w[0] == 2));
        }
    }

    #[test]
    fn givens_levels_and_product_are_orthogonal() {
        let mut rng = Rng::seed_from_u64(2);
        let l = ButterflyLayer::<f64>::new(8, ButterflyInit::Givens, &mut rng).unwrap();
        let eye = DenseMatrix::<f64>::identity(8);
        for level in l.levels() {
            let f = level.to_csr().to_dense();
            assert!(f.matmul_tn(&f).unwrap().max_abs_diff(&eye) <= 1e-12);
        }
        let q = l.dense_reconstruct();
        assert!(q.matmul_tn(&q).unwrap().max_abs_diff(&eye) <= 1e-12);
    }

    #[test]
    fn apply_matches_reconstruction_with_permutation() {
        let mut rng = Rng::seed_from_u64(3);
        let l = ButterflyLayer::<f64>::new(16, ButterflyInit::Givens, &mut rng)
            .unwrap()
            .with_permutation(Permutation::random(16, &mut rng))
            .unwrap();
        let t = l.dense_reconstruct();
        let x = random_batch(8, 16, &mut rng);
        let want = x.matmul_nt(&t).unwrap();
        assert!(l.apply(&x).unwrap().rel_err(&want) <= 1e-12);
    }

    #[test]
    fn reconstruction_matches_dense_factor_product() {
        let mut rng = Rng::seed_from_u64(4);
        let l = ButterflyLayer::<f64>::new(8, ButterflyInit::UniformScaled, &mut rng)
            .unwrap()
            .with_permutation(Permutation::random(8, &mut rng))
            .unwrap();
        let mut m = l.permutation_csr().to_dense();
        for level in l.levels() {
            m = level.to_csr().to_dense().matmul(&m).unwrap();
        }
        assert!(l.dense_reconstruct().max_abs_diff(&m) <= 1e-15);
    }

    #[test]
    fn multiply_count_is_two_n_log_n() {
        for k in 1..=10 {
            let n = 1usize << k;
            let l = ButterflyLayer::<Counted>::from_records(n, |_, p| {
                [Counted(1.0), Counted(p as f64), Counted(-1.0), Counted(0.5)]
            })
            .unwrap();
            let x: Vec<Counted> = (0..n).map(|i| Counted(i as f64)).collect();
            let (_, ops) = count_ops(|| l.apply_vec(&x).unwrap());
            assert_eq!(ops.muls, (2 * n * k) as u64);
            assert_eq!(ops.adds, (n * k) as u64);
        }
    }

    #[test]
    fn param_count_formula() {
        let mut rng = Rng::seed_from_u64(5);
        for k in 1..=12 {
            let n = 1usize << k;
            let l = ButterflyLayer::<f32>::new(n, ButterflyInit::Identity, &mut rng).unwrap();
            assert_eq!(l.param_count(), 2 * n * k);
            assert_eq!(l.allocated_params(), 2 * n * k);
        }
    }

    #[test]
    fn identity_layer_gradients_by_hand() {
        // L = ½‖y‖² so dy = y = x for the identity layer.
        let mut rng = Rng::seed_from_u64(6);
        let l = ButterflyLayer::<f64>::identity(4).unwrap();
        let x = random_batch(3, 4, &mut rng);
        let (y, cache) = l.forward_cached(&x).unwrap();
        let g = l.backward(&cache, &y).unwrap();
        assert_eq!(g.input, x);
        for (level, lg) in l.levels().iter().zip(&g.levels) {
            for p in 0..level.num_pairs() {
                let (i, j) = level.pair_indices(p);
                let mut want = [0.0; 4];
                for r in 0..3 {
                    let (xi, xj) = (x.get(r, i), x.get(r, j));
                    want[0] += xi * xi;
                    want[1] += xi * xj;
                    want[2] += xj * xi;
                    want[3] += xj * xj;
                }
                for q in 0..4 {
                    assert!((lg[4 * p + q] - want[q]).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = Rng::seed_from_u64(7);
        let l = ButterflyLayer::<f64>::new(8, ButterflyInit::UniformScaled, &mut rng)
            .unwrap()
            .with_bias(Some(vec![0.1; 8]))
            .unwrap();
        let x = random_batch(2, 8, &mut rng);
        let (_, cache) = l.forward_cached(&x).unwrap();
        let g = l.backward(&cache, &DenseMatrix::zeros(2, 8)).unwrap();
        assert!(g.params().iter().all(|p| p.iter().all(|&v| v == 0.0)));
        assert!(g.input.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_shape_errors() {
        let mut rng = Rng::seed_from_u64(8);
        let l = ButterflyLayer::<f64>::new(8, ButterflyInit::Givens, &mut rng).unwrap();
        let x = random_batch(2, 8, &mut rng);
        let (_, cache) = l.forward_cached(&x).unwrap();
        assert!(l.backward(&cache, &DenseMatrix::zeros(3, 8)).is_err());
        assert!(l.apply(&random_batch(1, 4, &mut rng)).is_err());
        let other = ButterflyLayer::<f64>::new(8, ButterflyInit::Givens, &mut rng).unwrap();
        let empty = ButterflyCache::<f64> {
            level_inputs: vec![],
            batch: 2,
        };
        assert!(matches!(
            other.backward(&empty, &DenseMatrix::zeros(2, 8)),
            Err(Error::MissingForwardCache)
        ));
    }

    #[test]
    fn cached_forward_matches_plain_forward() {
        let mut rng = Rng::seed_from_u64(9);
        let l = ButterflyLayer::<f64>::new(32, ButterflyInit::UniformScaled, &mut rng)
            .unwrap()
            .with_bias(Some(vec![0.25; 32]))
            .unwrap();
        let x = random_batch(4, 32, &mut rng);
        assert_eq!(l.forward_cached(&x).unwrap().0, l.apply(&x).unwrap());
    }
}
