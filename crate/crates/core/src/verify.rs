//! Numerical checks shared by tests, the acceptance suite and `sparsefly verify`.

use std::collections::BTreeSet;
use std::fmt;

use crate::baselines::{CirculantLayer, DenseLinear, FastfoodLayer, LowRankLayer};
use crate::butterfly::{fft_configure, naive_dft, ButterflyInit, ButterflyLayer, Permutation};
use crate::layer::{Gradients, Layer};
use crate::pixelfly::{BlockButterflyMask, PixelflyConfig, PixelflyLayer};
use crate::tensor::{count_ops, Complex64, Counted, CsrMatrix, DenseMatrix, Rng};
use crate::{Error, Result};

/// Central-difference step used by [`gradient_check`].
pub const FD_STEP: f64 = 1e-6;

/// Worst relative disagreement between analytic and finite-difference gradients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradCheck {
    /// Largest relative error over all parameter entries.
    pub params: f64,
    /// Largest relative error over the input entries.
    pub input: f64,
    /// Number of scalar entries compared.
    pub checked: usize,
}

impl GradCheck {
    pub fn max(&self) -> f64 {
        self.params.max(self.input)
    }
}

/// `|a - f| / max(|a|, |f|, 1)`.
pub fn grad_rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0)
}

/// Loss `Σ w·y + ½ Σ y²`; its gradient with respect to `y` is `w + y`.
fn probe_loss(y: &DenseMatrix<f64>, w: &DenseMatrix<f64>) -> f64 {
    y.as_slice()
        .iter()
        .zip(w.as_slice())
        .map(|(&yi, &wi)| wi * yi + 0.5 * yi * yi)
        .sum()
}

/// Compare `backward` against central differences of a fixed probe loss on a
/// random batch. Every parameter and input entry is perturbed.
pub fn gradient_check<L: Layer<f64>>(layer: &L, batch: usize, rng: &mut Rng) -> Result<GradCheck> {
    let x = DenseMatrix::<f64>::random_uniform(batch, layer.in_dim(), -1.0, 1.0, rng);
    let w = DenseMatrix::<f64>::random_uniform(batch, layer.out_dim(), -1.0, 1.0, rng);
    let (y, cache) = layer.forward_cached(&x)?;
    let dy = DenseMatrix::from_fn(batch, layer.out_dim(), |r, c| w.get(r, c) + y.get(r, c));
    let grads = layer.backward(&cache, &dy)?;

    let mut report = GradCheck::default();
    let mut probe = layer.clone();
    let analytic: Vec<Vec<f64>> = grads.params().iter().map(|g| g.to_vec()).collect();
    for (slot, analytic) in analytic.iter().enumerate() {
        for (idx, &a) in analytic.iter().enumerate() {
            let orig = probe.params_mut()[slot][idx];
            probe.params_mut()[slot][idx] = orig + FD_STEP;
            let plus = probe_loss(&probe.forward(&x)?, &w);
            probe.params_mut()[slot][idx] = orig - FD_STEP;
            let minus = probe_loss(&probe.forward(&x)?, &w);
            probe.params_mut()[slot][idx] = orig;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            report.params = report.params.max(grad_rel_err(a, numeric));
            report.checked += 1;
        }
    }

    let mut xp = x.clone();
    for r in 0..batch {
        for c in 0..layer.in_dim() {
            let orig = x.get(r, c);
            xp.set(r, c, orig + FD_STEP);
            let plus = probe_loss(&layer.forward(&xp)?, &w);
            xp.set(r, c, orig - FD_STEP);
            let minus = probe_loss(&layer.forward(&xp)?, &w);
            xp.set(r, c, orig);
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            report.input = report.input.max(grad_rel_err(grads.input().get(r, c), numeric));
            report.checked += 1;
        }
    }
    Ok(report)
}

/// Union of the supports of the block butterfly factors with strides
/// `1, 2, …, 2^(levels-1)` on a `grid × grid` block matrix, built factor by
/// factor: inside each group of `2s` blocks, block `i` touches itself and
/// its partner at distance `s`.
pub fn block_factor_union(grid: usize, levels: usize) -> Vec<(usize, usize)> {
    let mut out = BTreeSet::new();
    for i in 0..grid {
        out.insert((i, i));
    }
    for t in 0..levels {
        let s = 1 << t;
        for start in (0..grid).step_by(2 * s) {
            for off in 0..s.min(grid.saturating_sub(start + s)) {
                let (i, j) = (start + off, start + off + s);
                out.insert((i, j));
                out.insert((j, i));
            }
        }
    }
    out.into_iter().collect()
}

/// Outcome of one verification suite.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed error (relative, or absolute count difference).
    pub max_error: f64,
    pub tolerance: f64,
    pub cases: usize,
    pub detail: String,
}

impl fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<9} cases={:<4} max_err={:.3e} tol={:.0e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.max_error,
            self.tolerance
        )?;
        if !self.detail.is_empty() {
            write!(f, "  {}", self.detail)?;
        }
        Ok(())
    }
}

pub const SUITES: [&str; 6] = ["butterfly", "fft", "grad", "mask", "csr", "counts"];

fn suite(name: &'static str, tolerance: f64, cases: usize, max_error: f64, detail: String) -> SuiteResult {
    SuiteResult {
        name,
        passed: max_error <= tolerance,
        max_error,
        tolerance,
        cases,
        detail,
    }
}

/// Random butterfly layers (random permutation and coefficients) against
/// the dense product of their explicit factors.
pub fn suite_butterfly(layers: usize, seed: u64) -> Result<SuiteResult> {
    let mut rng = Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for i in 0..layers {
        let n = 1usize << (1 + i % 10);
        let layer = ButterflyLayer::<f64>::new(n, ButterflyInit::UniformScaled, &mut rng)?
            .with_permutation(Permutation::random(n, &mut rng))?;
        let x = DenseMatrix::<f64>::random_uniform(1, n, -1.0, 1.0, &mut rng);
        let want = layer.dense_reconstruct().matvec_slice(x.row(0))?;
        let got = layer.apply_vec(x.row(0))?;
        let want = DenseMatrix::from_vec(1, n, want)?;
        worst = worst.max(DenseMatrix::from_vec(1, n, got)?.rel_err(&want));
    }
    Ok(suite("butterfly", 1e-12, layers, worst, "N = 2..1024".into()))
}

/// Butterfly FFT against the direct DFT.
pub fn suite_fft(seed: u64) -> Result<SuiteResult> {
    let mut rng = Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for k in 1..=10 {
        let n = 1usize << k;
        let layer = fft_configure(n)?;
        for _ in 0..3 {
            let x: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)))
                .collect();
            let got = layer.apply_vec(&x)?;
            let want = naive_dft(&x);
            let scale = want.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            let err = got.iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            worst = worst.max(err / scale);
            cases += 1;
        }
    }
    Ok(suite("fft", 1e-9, cases, worst, "N = 2..1024".into()))
}

/// Finite-difference gradient checks for every layer type.
pub fn suite_grad(seed: u64) -> Result<SuiteResult> {
    let mut rng = Rng::seed_from_u64(seed);
    let mut per_layer = Vec::new();
    let record = |name: &str, r: GradCheck, per: &mut Vec<(String, f64)>| per.push((name.to_string(), r.max()));
    for n in [8usize, 64] {
        let bf = ButterflyLayer::<f64>::new(n, ButterflyInit::UniformScaled, &mut rng)?
            .with_permutation(Permutation::random(n, &mut rng))?
            .with_bias(Some(vec![0.1; n]))?;
        record("butterfly", gradient_check(&bf, 2, &mut rng)?, &mut per_layer);
        let px = PixelflyLayer::<f64>::new(
            n,
            &PixelflyConfig {
                block: 4,
                rank: 2,
                levels: None,
                bias: true,
            },
            &mut rng,
        )?;
        record("pixelfly", gradient_check(&px, 2, &mut rng)?, &mut per_layer);
        record(
            "dense",
            gradient_check(&DenseLinear::<f64>::new(n, n, true, &mut rng), 2, &mut rng)?,
            &mut per_layer,
        );
        record(
            "lowrank",
            gradient_check(&LowRankLayer::<f64>::new(n, n, 3, true, &mut rng)?, 2, &mut rng)?,
            &mut per_layer,
        );
        record(
            "circulant",
            gradient_check(&CirculantLayer::<f64>::new(n, true, &mut rng)?, 2, &mut rng)?,
            &mut per_layer,
        );
        record(
            "fastfood",
            gradient_check(&FastfoodLayer::<f64>::new(n, true, &mut rng)?, 2, &mut rng)?,
            &mut per_layer,
        );
    }
    let worst = per_layer.iter().map(|p| p.1).fold(0.0, f64::max);
    let (name, _) = per_layer
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one layer");
    Ok(suite(
        "grad",
        1e-5,
        per_layer.len(),
        worst,
        format!("worst layer: {name}"),
    ))
}

/// XOR-band mask against the factor-by-factor union, plus the nnz formula.
pub fn suite_mask() -> Result<SuiteResult> {
    let mut mismatches = 0usize;
    let mut cases = 0;
    for k in 0..=8 {
        let grid = 1usize << k;
        for block in [1usize, 2, 4] {
            let n = grid * block;
            let mask = BlockButterflyMask::build(n, block)?;
            cases += 1;
            if mask.blocks() != block_factor_union(grid, k).as_slice() || mask.nnz() != block * block * grid * (1 + k) {
                mismatches += 1;
            }
        }
    }
    Ok(suite("mask", 0.0, cases, mismatches as f64, "m = 1..256".into()))
}

/// CSR construction round trips and products against dense.
pub fn suite_csr(seed: u64) -> Result<SuiteResult> {
    let mut rng = Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for &(rows, cols, sparsity) in &[(1, 1, 0.0), (7, 5, 0.5), (64, 48, 0.9), (256, 256, 0.99), (33, 70, 0.0)] {
        let a = CsrMatrix::<f64>::random_sparse(rows, cols, sparsity, &mut rng)?;
        let dense = a.to_dense();
        let back = CsrMatrix::from_dense(&dense, 0.0)?.to_dense();
        if back != dense {
            return Err(Error::InvalidArgument("CSR dense round trip changed the matrix".into()));
        }
        let b = DenseMatrix::<f64>::random_uniform(cols, 9, -1.0, 1.0, &mut rng);
        worst = worst.max(a.spmm(&b)?.rel_err(&dense.matmul(&b)?));
        let x: Vec<f64> = (0..cols).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let got = DenseMatrix::from_vec(rows, 1, a.matvec(&x)?)?;
        let want = DenseMatrix::from_vec(rows, 1, dense.matvec_slice(&x)?)?;
        worst = worst.max(got.rel_err(&want));
        cases += 1;
    }
    Ok(suite("csr", 1e-12, cases, worst, String::new()))
}

/// Instrumented operation counts: butterfly multiplies `2·N·log2 N`, dense
/// matvec flops `2·N²`, per vector.
pub fn suite_counts() -> Result<SuiteResult> {
    let mut off = 0u64;
    let mut cases = 0;
    for k in 1..=10 {
        let n = 1usize << k;
        let layer = ButterflyLayer::<Counted>::from_records(n, |s, p| {
            let v = (s + p) as f64;
            [Counted(v + 1.0), Counted(0.5), Counted(-0.25), Counted(v)]
        })?;
        let x: Vec<Counted> = (0..n).map(|i| Counted(i as f64)).collect();
        let (_, ops) = count_ops(|| layer.apply_vec(&x));
        off += ops.muls.abs_diff((2 * n * k) as u64);
        let dense = DenseMatrix::<Counted>::from_fn(n, n, |i, j| Counted((i + j) as f64));
        let (_, ops) = count_ops(|| dense.matvec_slice(&x));
        off += ops.flops().abs_diff((2 * n * n) as u64);
        cases += 2;
    }
    Ok(suite(
        "counts",
        0.0,
        cases,
        off as f64,
        "N = 2..1024, integer counts".into(),
    ))
}

/// Run one suite by name.
pub fn run_suite(name: &str, seed: u64) -> Result<SuiteResult> {
    match name {
        "butterfly" => suite_butterfly(200, seed),
        "fft" => suite_fft(seed),
        "grad" => suite_grad(seed),
        "mask" => suite_mask(),
        "csr" => suite_csr(seed),
        "counts" => suite_counts(),
        _ => Err(Error::InvalidArgument(format!(
            "unknown suite '{name}' (valid: {})",
            SUITES.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::butterfly::{ButterflyInit, ButterflyLayer, ButterflyLinear};

    #[test]
    fn all_suites_pass() {
        for name in SUITES {
            let r = run_suite(name, 0).unwrap();
            assert!(r.passed, "{r}");
        }
        assert!(run_suite("nosuch", 0).unwrap_err().to_string().contains("counts"));
    }

    #[test]
    fn factor_union_small() {
        assert_eq!(block_factor_union(1, 0), vec![(0, 0)]);
        assert_eq!(block_factor_union(2, 1), vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
    }

    #[test]
    fn rel_err_floor() {
        assert_eq!(grad_rel_err(1e-9, 0.0), 1e-9);
        assert!((grad_rel_err(4.0, 2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn butterfly_gradients_match_differences() {
        let mut rng = Rng::seed_from_u64(3);
        for n in [2usize, 8, 16, 64] {
            let layer = ButterflyLayer::<f64>::new(n, ButterflyInit::UniformScaled, &mut rng)
                .unwrap()
                .with_permutation(crate::butterfly::Permutation::random(n, &mut rng))
                .unwrap()
                .with_bias(Some(vec![0.1; n]))
                .unwrap();
            let report = gradient_check(&layer, 3, &mut rng).unwrap();
            assert!(report.max() <= 1e-5, "n={n}: {report:?}");
        }
    }

    #[test]
    fn padded_butterfly_gradients_match_differences() {
        let mut rng = Rng::seed_from_u64(4);
        let layer = ButterflyLinear::<f64>::new(6, 11, true, ButterflyInit::UniformScaled, &mut rng).unwrap();
        let report = gradient_check(&layer, 2, &mut rng).unwrap();
        assert!(report.max() <= 1e-5, "{report:?}");
    }
}
