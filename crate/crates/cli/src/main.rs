//! `sparsefly`: verification suites, benchmarks, training and sweeps.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sparsefly::bench::LayerMethod;
use sparsefly::train::Method;

#[derive(Parser, Debug)]
#[command(
    name = "sparsefly",
    version,
    about = "Butterfly and pixelfly layers: verify, benchmark, train, sweep"
)]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for the parallel kernels.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the numerical oracle suites.
    Verify {
        /// Run a single suite.
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(sparsefly::verify::SUITES))]
        suite: Option<String>,
    },
    /// Time layer or matrix-multiply kernels.
    Bench {
        #[command(subcommand)]
        kind: BenchKind,
    },
    /// Train the single-hidden-layer classifier.
    Train(TrainArgs),
    /// Train pixelfly models over a grid of shapes and summarise.
    Sweep(SweepArgs),
}

#[derive(Subcommand, Debug)]
pub enum BenchKind {
    /// Dense vs butterfly vs pixelfly forward pass.
    Layers {
        /// Powers of two, as a list (`256,1024`) or a doubling range (`256..4096`).
        #[arg(long, default_value = "256..4096")]
        sizes: String,
        #[arg(long, value_delimiter = ',', default_value = "dense,butterfly,pixelfly")]
        methods: Vec<LayerMethod>,
        #[arg(long, default_value_t = 1)]
        batch: usize,
        /// Pixelfly block size.
        #[arg(long, default_value_t = 16)]
        block: usize,
        /// Pixelfly low-rank size.
        #[arg(long, default_value_t = 16)]
        rank: usize,
        #[command(flatten)]
        common: BenchCommon,
    },
    /// Constant-work matrix products with skewed left operands.
    Skew {
        #[arg(long, default_value_t = 1024)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.0625,0.25,1,4,16")]
        skews: Vec<f64>,
        #[command(flatten)]
        common: BenchCommon,
    },
    /// CSR vs dense matrix products.
    Sparse {
        #[arg(long, default_value_t = 2048)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.9,0.99")]
        sparsities: Vec<f64>,
        /// Columns of the dense right-hand side.
        #[arg(long, default_value_t = 64)]
        k: usize,
        #[command(flatten)]
        common: BenchCommon,
    },
}

#[derive(Args, Debug, Clone)]
pub struct BenchCommon {
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    #[arg(long, default_value_t = 10)]
    pub warmup: usize,
    /// Report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Directory for two-column plot data files.
    #[arg(long)]
    pub plot_dir: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Directory with the CIFAR-10 binary batches.
    #[arg(long, conflicts_with = "synthetic")]
    pub data: Option<PathBuf>,
    /// Use Gaussian blobs instead of CIFAR-10.
    #[arg(long)]
    pub synthetic: bool,
    /// Training-pool size for synthetic data (a fifth as many test samples are added).
    #[arg(long, default_value_t = 2000)]
    pub synthetic_samples: usize,
}

#[derive(Args, Debug, Clone)]
pub struct HyperArgs {
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, default_value_t = 50)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.15)]
    pub val_fraction: f64,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    #[arg(long, default_value = "baseline", value_parser = parse_method)]
    pub method: Method,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Low-rank first-layer rank.
    #[arg(long, default_value_t = 1)]
    pub rank: usize,
    #[arg(long, default_value_t = 64)]
    pub pixelfly_block: usize,
    #[arg(long, default_value_t = 32)]
    pub pixelfly_rank: usize,
    /// Pixelfly butterfly bands kept (default: all).
    #[arg(long)]
    pub pixelfly_levels: Option<usize>,
    #[arg(long, value_enum, default_value_t = Precision::F32)]
    pub precision: Precision,
    /// Per-epoch metrics (NDJSON); timings go to `<path>.timing`.
    #[arg(long, default_value = "metrics.ndjson")]
    pub metrics: PathBuf,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,7")]
    pub levels: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "8,16,32")]
    pub blocks: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "2,4,64,128")]
    pub ranks: Vec<usize>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, default_value = "sweep.json")]
    pub out: PathBuf,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: sparsefly::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(commands::CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(commands::CliError::Failed(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
