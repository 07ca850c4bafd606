use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::report::BenchRecord;
use super::timing::time_iters;
use super::BenchSpec;
use crate::butterfly::{ButterflyInit, ButterflyLayer};
use crate::pixelfly::{PixelflyConfig, PixelflyLayer};
use crate::tensor::{log2_exact, DenseMatrix, Rng};
use crate::{Error, Result};

/// Relative tolerance of the per-size output spot-checks.
const SPOT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerMethod {
    Dense,
    Butterfly,
    Pixelfly,
}

impl LayerMethod {
    pub const ALL: [LayerMethod; 3] = [LayerMethod::Dense, LayerMethod::Butterfly, LayerMethod::Pixelfly];

    pub fn name(self) -> &'static str {
        match self {
            LayerMethod::Dense => "dense",
            LayerMethod::Butterfly => "butterfly",
            LayerMethod::Pixelfly => "pixelfly",
        }
    }
}

impl fmt::Display for LayerMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LayerMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LayerMethod::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "unknown layer method '{s}' (valid: dense, butterfly, pixelfly)"
            ))
        })
    }
}

/// Dense weights through a fallible allocation so oversized problems are
/// reported instead of aborting.
fn try_dense(n: usize, rng: &mut Rng) -> Option<DenseMatrix<f64>> {
    let len = n.checked_mul(n)?;
    let mut data = Vec::new();
    data.try_reserve_exact(len).ok()?;
    let a = 1.0 / (n as f64).sqrt();
    data.extend((0..len).map(|_| rng.uniform(-a, a)));
    DenseMatrix::from_vec(n, n, data).ok()
}

fn record(spec: &BenchSpec, method: LayerMethod, n: usize) -> BenchRecord {
    BenchRecord {
        kernel: "layers".into(),
        method: method.name().into(),
        n,
        k: Some(spec.batch),
        ..Default::default()
    }
}

fn fill_timing(rec: &mut BenchRecord, t: &super::Timing, flops: u64) {
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

/// Butterfly output through the explicit CSR factors, one matrix at a time.
fn butterfly_via_factors(layer: &ButterflyLayer<f64>, x: &DenseMatrix<f64>) -> Result<DenseMatrix<f64>> {
    let mut cur = layer.permutation_csr().spmm(&x.transpose())?;
    for level in layer.levels() {
        cur = level.to_csr().spmm(&cur)?;
    }
    Ok(cur.transpose())
}

fn pixelfly_via_csr(layer: &PixelflyLayer<f64>, x: &DenseMatrix<f64>) -> Result<DenseMatrix<f64>> {
    let sparse = layer.sparse_csr().spmm(&x.transpose())?.transpose();
    let (u, v) = layer.low_rank();
    let low = x.matmul_nt(v)?.matmul_nt(u)?;
    sparse.add(&low)
}

/// Forward-pass timing of dense, butterfly and pixelfly layers over the
/// spec's sizes on one shared input per size. Each method's output is
/// compared once against an independent kernel; a mismatch marks the record
/// failed.
pub fn bench_layers(spec: &BenchSpec) -> Result<Vec<BenchRecord>> {
    spec.validate()?;
    let mut out = Vec::new();
    for &n in &spec.sizes {
        let depth = log2_exact(n).ok_or(Error::NotPowerOfTwo(n))?;
        let mut rng = Rng::seed_from_u64(spec.seed).fork(n as u64);
        let x = DenseMatrix::<f64>::random_uniform(spec.batch, n, -1.0, 1.0, &mut rng);
        let mut dense_mean = None;
        let mut rows = Vec::new();
        for &method in &spec.methods {
            let mut rec = record(spec, method, n);
            match method {
                LayerMethod::Dense => match try_dense(n, &mut rng.fork(1)) {
                    None => rec.status = "skipped: out of memory".into(),
                    Some(w) => {
                        let (t, y) = time_iters(spec.warmup, spec.iters, || x.matmul_nt(&w));
                        let y = y.expect("at least one iteration")?;
                        fill_timing(&mut rec, &t, 2 * (n * n * spec.batch) as u64);
                        rec.n_params = Some(n * n);
                        let row0: Vec<f64> = (0..n)
                            .map(|i| (0..n).map(|j| w.get(i, j) * x.get(0, j)).sum())
                            .collect();
                        let err = row0
                            .iter()
                            .zip(y.row(0))
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0, f64::max);
                        let scale = row0.iter().map(|v| v.abs()).fold(1.0, f64::max);
                        if err > SPOT_TOL * scale {
                            rec.status = format!("failed: spot-check error {err:e}");
                        }
                        dense_mean = Some(rec.mean_ms);
                    }
                },
                LayerMethod::Butterfly => {
                    let layer = ButterflyLayer::<f64>::new(n, ButterflyInit::Givens, &mut rng.fork(2))?;
                    let (t, y) = time_iters(spec.warmup, spec.iters, || layer.apply(&x));
                    let y = y.expect("at least one iteration")?;
                    fill_timing(&mut rec, &t, 2 * (n * depth * spec.batch) as u64);
                    rec.levels = Some(depth);
                    rec.n_params = Some(layer.structural_param_count());
                    let err = y.rel_err(&butterfly_via_factors(&layer, &x)?);
                    if err > SPOT_TOL {
                        rec.status = format!("failed: spot-check error {err:e}");
                    }
                }
                LayerMethod::Pixelfly => {
                    let block = spec.block.min(n);
                    let cfg = PixelflyConfig {
                        block,
                        rank: spec.rank.min(n),
                        levels: None,
                        bias: false,
                    };
                    match PixelflyLayer::<f64>::new(n, &cfg, &mut rng.fork(3)) {
                        Err(e) => rec.status = format!("skipped: {e}"),
                        Ok(layer) => {
                            let (t, y) = time_iters(spec.warmup, spec.iters, || layer.apply(&x));
                            let y = y.expect("at least one iteration")?;
                            let per_vec = 2 * layer.mask().nnz() + 4 * n * cfg.rank;
                            fill_timing(&mut rec, &t, (per_vec * spec.batch) as u64);
                            rec.block = Some(block);
                            rec.rank = Some(cfg.rank);
                            rec.levels = Some(layer.mask().levels());
                            rec.n_params = Some(layer.mask().nnz() + 2 * n * cfg.rank);
                            let err = y.rel_err(&pixelfly_via_csr(&layer, &x)?);
                            if err > SPOT_TOL {
                                rec.status = format!("failed: spot-check error {err:e}");
                            }
                        }
                    }
                }
            }
            rows.push(rec);
        }
        for rec in &mut rows {
            if let (Some(d), false) = (dense_mean, rec.is_skipped()) {
                if rec.mean_ms > 0.0 {
                    rec.speedup_vs_dense = Some(d / rec.mean_ms);
                }
            }
        }
        out.extend(rows);
    }
    Ok(out)
}

/// `(n, dense time / method time)` in ascending `n`.
pub fn speedup_series(records: &[BenchRecord], method: &str) -> Vec<(usize, f64)> {
    let mut v: Vec<(usize, f64)> = records
        .iter()
        .filter(|r| r.kernel == "layers" && r.method == method)
        .filter_map(|r| r.speedup_vs_dense.map(|s| (r.n, s)))
        .collect();
    v.sort_by_key(|p| p.0);
    v
}

/// Smallest measured size from which the method is faster than dense at
/// every larger measured size.
pub fn break_even(series: &[(usize, f64)]) -> Option<usize> {
    let mut found = None;
    for &(n, s) in series.iter().rev() {
        if s > 1.0 {
            found = Some(n);
        } else {
            break;
        }
    }
    found
}
