use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::BlockButterflyMask;
use crate::layer::{add_bias_rows, bias_grad, check_input, Gradients, Layer};
use crate::tensor::{parallel_enabled, CsrMatrix, DenseMatrix, Field, Rng, Scalar};
use crate::{Error, Result};

/// Shape of a pixelfly layer apart from its size.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelflyConfig {
    pub block: usize,
    pub rank: usize,
    /// Retained butterfly bands; `None` keeps all of them.
    pub levels: Option<usize>,
    pub bias: bool,
}

impl Default for PixelflyConfig {
    fn default() -> Self {
        Self {
            block: 64,
            rank: 32,
            levels: None,
            bias: true,
        }
    }
}

impl PixelflyConfig {
    pub fn mask(&self, n: usize) -> Result<BlockButterflyMask> {
        match self.levels {
            Some(l) => BlockButterflyMask::build_with_levels(n, self.block, l),
            None => BlockButterflyMask::build(n, self.block),
        }
    }

    /// Closed-form learnable count for an `n × n` layer.
    pub fn param_count(&self, n: usize) -> Result<usize> {
        let mask = self.mask(n)?;
        Ok(mask.nnz() + 2 * n * self.rank + if self.bias { n } else { 0 })
    }
}

/// `y = S·x + U·(V·x) + bias` with `S` supported on a block butterfly mask.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelflyLayer<T> {
    mask: BlockButterflyMask,
    /// One `b × b` row-major block per mask block, in mask order.
    values: Vec<T>,
    u: DenseMatrix<T>,
    v: DenseMatrix<T>,
    bias: Option<Vec<T>>,
}

#[derive(Clone, Debug)]
pub struct PixelflyCache<T> {
    x: DenseMatrix<T>,
    /// `X·Vᵀ`, `batch × r`.
    low: DenseMatrix<T>,
}

#[derive(Clone, Debug)]
pub struct PixelflyGrads<T> {
    pub values: Vec<T>,
    pub u: DenseMatrix<T>,
    pub v: DenseMatrix<T>,
    pub bias: Option<Vec<T>>,
    pub input: DenseMatrix<T>,
}

impl<T: Field> Gradients<T> for PixelflyGrads<T> {
    fn params(&self) -> Vec<&[T]> {
        let mut out = vec![self.values.as_slice(), self.u.as_slice(), self.v.as_slice()];
        out.extend(self.bias.as_deref());
        out
    }

    fn input(&self) -> &DenseMatrix<T> {
        &self.input
    }
}

impl<T: Scalar> PixelflyLayer<T> {
    /// Random layer: block values `~ U(±1/√fan)` with `fan` the per-row
    /// nonzeros, `U` and `V` `~ U(±1/√n)`, zero bias.
    pub fn new(n: usize, config: &PixelflyConfig, rng: &mut Rng) -> Result<Self> {
        let mask = config.mask(n)?;
        if config.rank > n {
            return Err(Error::InvalidArgument(format!("rank {} exceeds n = {n}", config.rank)));
        }
        let a = 1.0 / (mask.row_nnz() as f64).sqrt();
        let values = (0..mask.nnz()).map(|_| T::from_f64(rng.uniform(-a, a))).collect();
        let s = 1.0 / (n as f64).sqrt();
        let u = DenseMatrix::random_uniform(n, config.rank, -s, s, rng);
        let v = DenseMatrix::random_uniform(config.rank, n, -s, s, rng);
        let bias = config.bias.then(|| vec![T::zero(); n]);
        Self::from_parts(mask, values, u, v, bias)
    }

    pub fn from_parts(
        mask: BlockButterflyMask,
        values: Vec<T>,
        u: DenseMatrix<T>,
        v: DenseMatrix<T>,
        bias: Option<Vec<T>>,
    ) -> Result<Self> {
        let n = mask.n();
        if values.len() != mask.nnz() {
            return Err(Error::InvalidArgument(format!(
                "mask holds {} entries, got {} values",
                mask.nnz(),
                values.len()
            )));
        }
        if u.rows() != n || v.cols() != n || u.cols() != v.rows() {
            return Err(Error::ShapeMismatch {
                op: "pixelfly_low_rank",
                lhs: u.shape(),
                rhs: v.shape(),
            });
        }
        if u.cols() > n {
            return Err(Error::InvalidArgument(format!("rank {} exceeds n = {n}", u.cols())));
        }
        if bias.as_ref().is_some_and(|b| b.len() != n) {
            return Err(Error::InvalidArgument(format!("bias must have {n} entries")));
        }
        Ok(Self {
            mask,
            values,
            u,
            v,
            bias,
        })
    }

    pub fn n(&self) -> usize {
        self.mask.n()
    }

    pub fn rank(&self) -> usize {
        self.u.cols()
    }

    pub fn mask(&self) -> &BlockButterflyMask {
        &self.mask
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn low_rank(&self) -> (&DenseMatrix<T>, &DenseMatrix<T>) {
        (&self.u, &self.v)
    }

    pub fn low_rank_mut(&mut self) -> (&mut DenseMatrix<T>, &mut DenseMatrix<T>) {
        (&mut self.u, &mut self.v)
    }

    pub fn bias(&self) -> Option<&[T]> {
        self.bias.as_deref()
    }

    pub fn bias_mut(&mut self) -> Option<&mut [T]> {
        self.bias.as_deref_mut()
    }

    /// `y = S·x` for one sample, accumulated into `y`.
    fn sparse_row(&self, x: &[T], y: &mut [T]) {
        let b = self.mask.block_size();
        let bb = b * b;
        let ptr = self.mask.row_ptr();
        for (br, yb) in y.chunks_exact_mut(b).enumerate() {
            for k in ptr[br]..ptr[br + 1] {
                let bc = self.mask.blocks()[k].1;
                let xb = &x[bc * b..(bc + 1) * b];
                let blk = &self.values[k * bb..(k + 1) * bb];
                for (yi, brow) in yb.iter_mut().zip(blk.chunks_exact(b)) {
                    let mut acc = T::zero();
                    for (&w, &xv) in brow.iter().zip(xb) {
                        acc += w * xv;
                    }
                    *yi += acc;
                }
            }
        }
    }

    /// `S·X` for a batch.
    pub fn sparse_apply(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        check_input("pixelfly_apply", x, self.n())?;
        let n = self.n();
        let mut y = DenseMatrix::zeros(x.rows(), n);
        if parallel_enabled(x.rows() * self.mask.nnz()) {
            y.as_mut_slice()
                .par_chunks_mut(n)
                .zip(x.as_slice().par_chunks(n))
                .for_each(|(yr, xr)| self.sparse_row(xr, yr));
        } else {
            for r in 0..x.rows() {
                self.sparse_row(x.row(r), y.row_mut(r));
            }
        }
        Ok(y)
    }

    fn forward_inner(&self, x: &DenseMatrix<T>) -> Result<(DenseMatrix<T>, DenseMatrix<T>)> {
        let mut y = self.sparse_apply(x)?;
        let low = x.matmul_nt(&self.v)?;
        if self.rank() > 0 {
            let lr = low.matmul_nt(&self.u)?;
            for (yi, &li) in y.as_mut_slice().iter_mut().zip(lr.as_slice()) {
                *yi += li;
            }
        }
        add_bias_rows(&mut y, self.bias.as_deref());
        Ok((y, low))
    }

    pub fn apply(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        Ok(self.forward_inner(x)?.0)
    }

    /// The sparse part as scalar CSR.
    pub fn sparse_csr(&self) -> CsrMatrix<T> {
        let b = self.mask.block_size();
        let mut triplets = Vec::with_capacity(self.mask.nnz());
        for (k, &(br, bc)) in self.mask.blocks().iter().enumerate() {
            for r in 0..b {
                for c in 0..b {
                    triplets.push((br * b + r, bc * b + c, self.values[k * b * b + r * b + c]));
                }
            }
        }
        CsrMatrix::from_triplets(self.n(), self.n(), &triplets).expect("mask blocks are in range")
    }

    /// `S + U·V` as a dense `n × n` matrix (bias excluded).
    pub fn dense_reconstruct(&self) -> DenseMatrix<T> {
        let s = self.sparse_csr().to_dense();
        if self.rank() == 0 {
            return s;
        }
        let uv = self.u.matmul(&self.v).expect("low-rank factors are n x r and r x n");
        s.add(&uv).expect("both are n x n")
    }
}

impl<T: Scalar> Layer<T> for PixelflyLayer<T> {
    type Cache = PixelflyCache<T>;
    type Grads = PixelflyGrads<T>;

    fn in_dim(&self) -> usize {
        self.n()
    }

    fn out_dim(&self) -> usize {
        self.n()
    }

    fn forward(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        self.apply(x)
    }

    fn forward_cached(&self, x: &DenseMatrix<T>) -> Result<(DenseMatrix<T>, Self::Cache)> {
        let (y, low) = self.forward_inner(x)?;
        Ok((y, PixelflyCache { x: x.clone(), low }))
    }

    fn backward(&self, cache: &Self::Cache, dy: &DenseMatrix<T>) -> Result<Self::Grads> {
        let n = self.n();
        if dy.shape() != cache.x.shape() {
            return Err(Error::ShapeMismatch {
                op: "pixelfly_backward",
                lhs: cache.x.shape(),
                rhs: dy.shape(),
            });
        }
        let b = self.mask.block_size();
        let bb = b * b;
        let mut values = vec![T::zero(); self.values.len()];
        let mut input = DenseMatrix::zeros(dy.rows(), n);
        for s in 0..dy.rows() {
            let (xr, dyr) = (cache.x.row(s), dy.row(s));
            let dxr = input.row_mut(s);
            for (k, &(br, bc)) in self.mask.blocks().iter().enumerate() {
                let blk = &self.values[k * bb..(k + 1) * bb];
                let g = &mut values[k * bb..(k + 1) * bb];
                let xb = &xr[bc * b..(bc + 1) * b];
                let dxb = &mut dxr[bc * b..(bc + 1) * b];
                for r in 0..b {
                    let d = dyr[br * b + r];
                    let (grow, wrow) = (&mut g[r * b..(r + 1) * b], &blk[r * b..(r + 1) * b]);
                    for c in 0..b {
                        grow[c] += d * xb[c];
                        dxb[c] += wrow[c] * d;
                    }
                }
            }
        }
        let u = dy.matmul_tn(&cache.low)?;
        let dlow = dy.matmul(&self.u)?;
        let v = dlow.matmul_tn(&cache.x)?;
        if self.rank() > 0 {
            let back = dlow.matmul(&self.v)?;
            for (d, &l) in input.as_mut_slice().iter_mut().zip(back.as_slice()) {
                *d += l;
            }
        }
        Ok(PixelflyGrads {
            values,
            u,
            v,
            bias: self.bias.as_ref().map(|_| bias_grad(dy)),
            input,
        })
    }

    fn params(&self) -> Vec<&[T]> {
        let mut out = vec![self.values.as_slice(), self.u.as_slice(), self.v.as_slice()];
        out.extend(self.bias.as_deref());
        out
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = vec![self.values.as_mut_slice(), self.u.as_mut_slice(), self.v.as_mut_slice()];
        out.extend(self.bias.as_deref_mut());
        out
    }

    fn param_count(&self) -> usize {
        let (n, b, m) = (self.n(), self.mask.block_size(), self.mask.grid_size());
        b * b * m * (1 + self.mask.levels()) + 2 * n * self.rank() + if self.bias.is_some() { n } else { 0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::DenseLinear;
    use crate::verify::gradient_check;

    fn config(block: usize, rank: usize, bias: bool) -> PixelflyConfig {
        PixelflyConfig {
            block,
            rank,
            levels: None,
            bias,
        }
    }

    #[test]
    fn zero_layer_is_zero_operator() {
        let mut rng = Rng::seed_from_u64(0);
        let mut l = PixelflyLayer::<f64>::new(16, &config(4, 0, false), &mut rng).unwrap();
        l.values_mut().fill(0.0);
        let x = DenseMatrix::random_uniform(3, 16, -1.0, 1.0, &mut rng);
        assert_eq!(l.apply(&x).unwrap().max_abs(), 0.0);
        assert_eq!(l.dense_reconstruct().max_abs(), 0.0);
    }

    #[test]
    fn sparse_zero_with_bias_returns_bias() {
        let mask = BlockButterflyMask::build(8, 2).unwrap();
        let nnz = mask.nnz();
        let bias: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let l = PixelflyLayer::from_parts(
            mask,
            vec![0.0; nnz],
            DenseMatrix::zeros(8, 0),
            DenseMatrix::zeros(0, 8),
            Some(bias.clone()),
        )
        .unwrap();
        let y = l.apply(&DenseMatrix::from_fn(2, 8, |r, c| (r + c) as f64)).unwrap();
        assert_eq!(y.row(1), bias.as_slice());
    }

    #[test]
    fn identity_through_low_rank() {
        let mask = BlockButterflyMask::build(4, 4).unwrap();
        let l = PixelflyLayer::from_parts(
            mask,
            vec![0.0; 16],
            DenseMatrix::identity(4),
            DenseMatrix::identity(4),
            None,
        )
        .unwrap();
        assert_eq!(l.dense_reconstruct(), DenseMatrix::identity(4));
        let x = DenseMatrix::from_fn(2, 4, |r, c| (r * 4 + c) as f64 - 3.0);
        assert_eq!(l.apply(&x).unwrap(), x);
    }

    #[test]
    fn param_count_examples() {
        let mut rng = Rng::seed_from_u64(1);
        let l = PixelflyLayer::<f32>::new(1024, &config(16, 16, false), &mut rng).unwrap();
        assert_eq!(l.param_count(), 147456);
        assert_eq!(l.allocated_params(), 147456);
        assert_eq!(config(16, 16, false).param_count(1024).unwrap(), 147456);
        for (n, b, r) in [(8, 2, 0), (16, 4, 3), (64, 8, 5), (64, 64, 1), (128, 4, 2)] {
            for bias in [false, true] {
                let l = PixelflyLayer::<f64>::new(n, &config(b, r, bias), &mut rng).unwrap();
                assert_eq!(l.param_count(), l.allocated_params());
            }
        }
    }

    #[test]
    fn apply_matches_dense_reconstruction() {
        let mut rng = Rng::seed_from_u64(2);
        for trial in 0..100 {
            let n = 1usize << (2 + trial % 7);
            let b = 1usize << (trial % 3).min(n.trailing_zeros() as usize);
            let r = trial % 5;
            let l = PixelflyLayer::<f64>::new(n, &config(b, r, trial % 2 == 0), &mut rng).unwrap();
            let x = DenseMatrix::random_uniform(2, n, -1.0, 1.0, &mut rng);
            let mut want = x.matmul_nt(&l.dense_reconstruct()).unwrap();
            crate::layer::add_bias_rows(&mut want, l.bias());
            assert!(l.apply(&x).unwrap().rel_err(&want) <= 1e-12, "trial {trial}");
        }
    }

    #[test]
    fn low_rank_path_is_associative() {
        let mut rng = Rng::seed_from_u64(3);
        let mut l = PixelflyLayer::<f64>::new(16, &config(4, 3, false), &mut rng).unwrap();
        l.values_mut().fill(0.0);
        let x = DenseMatrix::random_uniform(1, 16, -1.0, 1.0, &mut rng);
        let (u, v) = l.low_rank();
        let want = x.matmul_nt(&u.matmul(v).unwrap()).unwrap();
        assert!(l.apply(&x).unwrap().rel_err(&want) <= 1e-12);
    }

    #[test]
    fn sparse_pattern_equals_mask() {
        let mut rng = Rng::seed_from_u64(4);
        let l = PixelflyLayer::<f64>::new(32, &config(4, 0, false), &mut rng).unwrap();
        let d = l.dense_reconstruct();
        for i in 0..32 {
            for j in 0..32 {
                assert_eq!(d.get(i, j) != 0.0, l.mask().contains(i / 4, j / 4));
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = Rng::seed_from_u64(5);
        let l = PixelflyLayer::<f64>::new(16, &config(4, 2, true), &mut rng).unwrap();
        let x = DenseMatrix::random_uniform(3, 16, -1.0, 1.0, &mut rng);
        let (_, cache) = l.forward_cached(&x).unwrap();
        let g = l.backward(&cache, &DenseMatrix::zeros(3, 16)).unwrap();
        assert!(g.params().iter().all(|p| p.iter().all(|&v| v == 0.0)));
        assert_eq!(g.input.max_abs(), 0.0);
    }

    #[test]
    fn gradients_match_differences() {
        let mut rng = Rng::seed_from_u64(6);
        for (n, b, r) in [(16, 4, 0), (16, 4, 3), (32, 2, 2), (64, 8, 4)] {
            let mut cfg = config(b, r, true);
            let mut l = PixelflyLayer::<f64>::new(n, &cfg, &mut rng).unwrap();
            l.bias_mut().unwrap().fill(0.2);
            assert!(gradient_check(&l, 2, &mut rng).unwrap().max() <= 1e-5);
            cfg.levels = Some(1);
            let l = PixelflyLayer::<f64>::new(n, &cfg, &mut rng).unwrap();
            assert!(gradient_check(&l, 2, &mut rng).unwrap().max() <= 1e-5);
        }
    }

    #[test]
    fn single_block_matches_dense_linear() {
        let mut rng = Rng::seed_from_u64(7);
        let l = PixelflyLayer::<f64>::new(8, &config(8, 0, false), &mut rng).unwrap();
        let w = DenseMatrix::from_vec(8, 8, l.values().to_vec()).unwrap();
        let dense = DenseLinear::from_weight(w, None).unwrap();
        let x = DenseMatrix::random_uniform(4, 8, -1.0, 1.0, &mut rng);
        let dy = DenseMatrix::random_uniform(4, 8, -1.0, 1.0, &mut rng);
        let (y1, c1) = l.forward_cached(&x).unwrap();
        let (y2, c2) = dense.forward_cached(&x).unwrap();
        assert!(y1.rel_err(&y2) <= 1e-15);
        let g1 = l.backward(&c1, &dy).unwrap();
        let g2 = dense.backward(&c2, &dy).unwrap();
        assert!(g1.input.rel_err(&g2.input) <= 1e-15);
        let dv = DenseMatrix::from_vec(8, 8, g1.values.clone()).unwrap();
        assert!(dv.rel_err(&g2.weight) <= 1e-15);
    }

    #[test]
    fn shape_errors() {
        let mut rng = Rng::seed_from_u64(8);
        let l = PixelflyLayer::<f64>::new(16, &config(4, 1, false), &mut rng).unwrap();
        assert!(l.apply(&DenseMatrix::zeros(1, 8)).is_err());
        let (_, c) = l.forward_cached(&DenseMatrix::zeros(2, 16)).unwrap();
        assert!(l.backward(&c, &DenseMatrix::zeros(3, 16)).is_err());
        assert!(PixelflyLayer::<f64>::new(16, &config(4, 17, false), &mut rng).is_err());
    }
}
