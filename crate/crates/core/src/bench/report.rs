use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Column order of the CSV report.
pub const CSV_HEADER: [&str; 19] = [
    "kernel",
    "method",
    "n",
    "m",
    "k",
    "skew",
    "sparsity",
    "block",
    "rank",
    "levels",
    "iters",
    "mean_ms",
    "std_ms",
    "min_ms",
    "flops",
    "throughput_gflops",
    "n_params",
    "speedup_vs_dense",
    "status",
];

/// One timed configuration. Fields that do not apply to a kernel are `None`
/// and written as empty cells.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub kernel: String,
    pub method: String,
    pub n: usize,
    pub m: Option<usize>,
    pub k: Option<usize>,
    pub skew: Option<f64>,
    pub sparsity: Option<f64>,
    pub block: Option<usize>,
    pub rank: Option<usize>,
    pub levels: Option<usize>,
    pub iters: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub min_ms: f64,
    /// Closed-form flop count of one timed call.
    pub flops: u64,
    pub throughput_gflops: f64,
    pub n_params: Option<usize>,
    pub speedup_vs_dense: Option<f64>,
    /// `ok`, `noisy`, `skipped: <reason>` or `failed: <reason>`.
    pub status: String,
}

impl BenchRecord {
    pub fn is_skipped(&self) -> bool {
        self.status.starts_with("skipped")
    }

    pub fn is_failed(&self) -> bool {
        self.status.starts_with("failed")
    }
}

/// Records together with the configuration that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub seed: u64,
    pub threads: usize,
    pub config: serde_json::Value,
    pub records: Vec<BenchRecord>,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// CSV with the fixed header; `comment`, if given, becomes a leading `# ` line.
pub fn write_csv(path: &Path, records: &[BenchRecord], comment: Option<&str>) -> Result<()> {
    let mut out = Vec::new();
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(out, "# {line}").expect("writing to memory");
        }
    }
    {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut out);
        w.write_record(CSV_HEADER).map_err(csv_err)?;
        for r in records {
            w.serialize(r).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<BenchRecord>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(csv_err)?;
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    if header != CSV_HEADER {
        return Err(Error::Format(format!("unexpected CSV header {header:?}")));
    }
    r.deserialize().map(|rec| rec.map_err(csv_err)).collect()
}

pub fn write_json(path: &Path, report: &Report) -> Result<()> {
    let s = serde_json::to_string_pretty(report).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_json(path: &Path) -> Result<Report> {
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&s).map_err(|e| Error::Format(e.to_string()))
}

/// Two whitespace-separated columns, one point per line.
pub fn write_plot_data(path: &Path, points: &[(f64, f64)]) -> Result<()> {
    let mut s = String::new();
    for (x, y) in points {
        s.push_str(&format!("{x} {y}\n"));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// `(n, speedup)` for one method of a layer benchmark.
pub fn speedup_plot_data(records: &[BenchRecord], method: &str) -> Vec<(f64, f64)> {
    records
        .iter()
        .filter(|r| r.method == method)
        .filter_map(|r| r.speedup_vs_dense.map(|s| (r.n as f64, s)))
        .collect()
}

/// `(skew, GFLOP/s)` for a skew benchmark.
pub fn throughput_plot_data(records: &[BenchRecord]) -> Vec<(f64, f64)> {
    records
        .iter()
        .filter(|r| !r.is_skipped())
        .filter_map(|r| r.skew.map(|s| (s, r.throughput_gflops)))
        .collect()
}
