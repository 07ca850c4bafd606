use super::report::BenchRecord;
use super::timing::{time_iters, time_iters_checked};
use super::BenchSpec;
use crate::tensor::{CsrMatrix, DenseMatrix, Rng};
use crate::{Error, Result};

const SPOT_TOL: f64 = 1e-12;

/// `(m, n)` with `m / n ≈ skew` and `m·n ≈ base²`, each at least 1.
pub fn skewed_dims(base: usize, skew: f64) -> Result<(usize, usize)> {
    if !(skew.is_finite() && skew > 0.0) {
        return Err(Error::InvalidArgument(format!("skew must be positive, got {skew}")));
    }
    let r = skew.sqrt();
    let m = ((base as f64 * r).round() as usize).max(1);
    let n = ((base as f64 / r).round() as usize).max(1);
    Ok((m, n))
}

fn fill(rec: &mut BenchRecord, t: &super::Timing, flops: u64) {
    rec.iters = t.iters();
    rec.mean_ms = t.mean_ms();
    rec.std_ms = t.std_ms();
    rec.min_ms = t.min_ms();
    rec.flops = flops;
    rec.throughput_gflops = if rec.mean_ms > 0.0 {
        flops as f64 / (rec.mean_ms * 1e6)
    } else {
        0.0
    };
    rec.status = if t.noisy() { "noisy".into() } else { "ok".into() };
}

/// Naive triple loop on row `i` of `a·b`.
fn reference_row(a: &DenseMatrix<f64>, b: &DenseMatrix<f64>, i: usize) -> Vec<f64> {
    (0..b.cols())
        .map(|j| (0..a.cols()).map(|p| a.get(i, p) * b.get(p, j)).sum())
        .collect()
}

/// `A (m × n) · B (n × k)` with `k` equal to the base size and `m·n` held at
/// `base²`, so every skew does the same `2mnk` work up to rounding. Each
/// timed result is spot-checked on its first and last rows.
pub fn bench_skewed_mm(spec: &BenchSpec) -> Result<Vec<BenchRecord>> {
    spec.validate()?;
    let mut out = Vec::new();
    for &base in &spec.sizes {
        for &skew in &spec.skews {
            let (m, n) = skewed_dims(base, skew)?;
            let k = base;
            let mut rng = Rng::seed_from_u64(spec.seed).fork(base as u64 ^ skew.to_bits());
            let a = DenseMatrix::<f64>::random_uniform(m, n, -1.0, 1.0, &mut rng);
            let b = DenseMatrix::<f64>::random_uniform(n, k, -1.0, 1.0, &mut rng);
            let (t, c) = time_iters(spec.warmup, spec.iters, || a.matmul(&b));
            let c = c.expect("at least one iteration")?;
            let mut rec = BenchRecord {
                kernel: "skew".into(),
                method: "dense".into(),
                n,
                m: Some(m),
                k: Some(k),
                skew: Some(m as f64 / n as f64),
                ..Default::default()
            };
            fill(&mut rec, &t, 2 * (m * n * k) as u64);
            for i in [0, m - 1] {
                let want = reference_row(&a, &b, i);
                let err = want
                    .iter()
                    .zip(c.row(i))
                    .map(|(p, q)| (p - q).abs())
                    .fold(0.0, f64::max);
                let scale = want.iter().map(|v| v.abs()).fold(1.0, f64::max);
                if err > SPOT_TOL * scale {
                    rec.status = format!("failed: spot-check error {err:e}");
                }
            }
            out.push(rec);
        }
    }
    Ok(out)
}

/// CSR times dense against dense times dense on the same operands
/// (`n × n` sparse, `n × rhs_cols` dense). Throughput uses the dense flop
/// count `2·n²·k` for both. Every timed CSR result is compared with the
/// timed dense result.
pub fn bench_sparse_mm(spec: &BenchSpec) -> Result<Vec<BenchRecord>> {
    spec.validate()?;
    let mut out = Vec::new();
    for &n in &spec.sizes {
        for &sparsity in &spec.sparsities {
            if !(0.0..1.0).contains(&sparsity) {
                return Err(Error::InvalidArgument(format!("sparsity {sparsity} not in [0, 1)")));
            }
            let k = spec.rhs_cols;
            let mut rng = Rng::seed_from_u64(spec.seed).fork(n as u64 ^ sparsity.to_bits());
            let a = CsrMatrix::<f64>::random_sparse(n, n, sparsity, &mut rng)?;
            let dense_a = a.to_dense();
            let b = DenseMatrix::<f64>::random_uniform(n, k, -1.0, 1.0, &mut rng);
            let flops = 2 * (n * n * k) as u64;
            let base = BenchRecord {
                kernel: "sparse".into(),
                n,
                m: Some(n),
                k: Some(k),
                sparsity: Some(sparsity),
                n_params: Some(a.nnz()),
                ..Default::default()
            };

            let (td, cd) = time_iters(spec.warmup, spec.iters, || dense_a.matmul(&b));
            let cd = cd.expect("at least one iteration")?;
            let mut dense = BenchRecord {
                method: "dense".into(),
                n_params: Some(n * n),
                ..base.clone()
            };
            fill(&mut dense, &td, flops);
            dense.speedup_vs_dense = Some(1.0);

            let mut spmm_err = None;
            let (ts, err) = time_iters_checked(
                spec.warmup,
                spec.iters,
                || a.spmm(&b),
                |c| match c {
                    Ok(c) => c.rel_err(&cd),
                    Err(e) => {
                        spmm_err.get_or_insert_with(|| e.to_string());
                        f64::INFINITY
                    }
                },
            );
            if let Some(e) = spmm_err {
                return Err(Error::InvalidArgument(format!("csr product failed: {e}")));
            }
            let mut csr = BenchRecord {
                method: "csr".into(),
                ..base
            };
            fill(&mut csr, &ts, flops);
            if csr.mean_ms > 0.0 {
                csr.speedup_vs_dense = Some(dense.mean_ms / csr.mean_ms);
            }
            if err > SPOT_TOL {
                csr.status = format!("failed: result differs from dense by {err:e}");
            }
            out.push(dense);
            out.push(csr);
        }
    }
    Ok(out)
}
