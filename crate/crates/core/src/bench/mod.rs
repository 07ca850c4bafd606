//! Timing harness, layer/matmul benchmarks, the pixelfly parameter sweep and
//! report emitters.

mod layers;
mod matmul;
mod report;
mod sweep;
mod timing;

pub use layers::{bench_layers, break_even, speedup_series, LayerMethod};
pub use matmul::{bench_skewed_mm, bench_sparse_mm, skewed_dims};
pub use report::{
    read_csv, read_json, speedup_plot_data, throughput_plot_data, write_csv, write_json, write_plot_data, BenchRecord,
    Report, CSV_HEADER,
};
pub use sweep::{
    summarize, sweep_pixelfly, training_evaluator, CellMetrics, CellRecord, GroupStats, MetricStats, SweepCell,
    SweepGrid, SweepParam, SweepReport, SweepSummary,
};
pub use timing::{is_noisy, time_iters, time_iters_checked, Timing, NOISE_MIN_MEAN_MS, NOISE_RATIO};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Benchmark configuration shared by the layer, skew and sparse kernels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub kernel: String,
    /// Problem sizes, ascending.
    pub sizes: Vec<usize>,
    pub skews: Vec<f64>,
    pub sparsities: Vec<f64>,
    pub methods: Vec<LayerMethod>,
    /// Rows per forward pass in the layer benchmark.
    pub batch: usize,
    /// Right-hand-side columns in the sparse benchmark.
    pub rhs_cols: usize,
    pub block: usize,
    pub rank: usize,
    pub warmup: usize,
    pub iters: usize,
    pub seed: u64,
    pub threads: usize,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            kernel: "layers".into(),
            sizes: vec![256, 512, 1024, 2048, 4096],
            skews: vec![0.0625, 0.25, 1.0, 4.0, 16.0],
            sparsities: vec![0.9, 0.99],
            methods: LayerMethod::ALL.to_vec(),
            batch: 1,
            rhs_cols: 64,
            block: 16,
            rank: 16,
            warmup: 10,
            iters: 1000,
            seed: 0,
            threads: 1,
        }
    }
}

impl BenchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.iters == 0 {
            return Err(Error::InvalidArgument("timed iterations must be at least 1".into()));
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(Error::InvalidArgument("sizes must be non-empty and positive".into()));
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("sizes must be strictly ascending".into()));
        }
        if self.batch == 0 || self.rhs_cols == 0 {
            return Err(Error::InvalidArgument("batch and rhs columns must be positive".into()));
        }
        Ok(())
    }
}
