use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::json;
use sparsefly::bench::{
    bench_layers, bench_skewed_mm, bench_sparse_mm, break_even, speedup_plot_data, speedup_series, sweep_pixelfly,
    throughput_plot_data, training_evaluator, write_csv, write_json, write_plot_data, BenchRecord, BenchSpec,
    LayerMethod, Report, SweepGrid,
};
use sparsefly::pixelfly::PixelflyConfig;
use sparsefly::train::{
    load_cifar10, save_checkpoint, synthetic_dataset, train_shl, CheckpointMeta, Dataset, ModelConfig, ShlModel,
    Splits, TrainConfig, NUM_CLASSES,
};
use sparsefly::{Error, Rng, Scalar};

use crate::{BenchCommon, BenchKind, Cli, Command, DataArgs, Format, HyperArgs, Precision, SweepArgs, TrainArgs};

pub enum CliError {
    /// Bad flags or values; exit status 2.
    Usage(String),
    /// Runtime failure; exit status 1.
    Failed(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Failed(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::NotPowerOfTwo(_) | Error::InvalidBlock { .. } => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Failed(other.into()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Returns whether every check passed.
pub fn run(cli: Cli) -> CliResult<bool> {
    if cli.threads == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .context("installing the thread pool")?;
    match cli.command {
        Command::Verify { suite } => verify(suite.as_deref(), cli.seed),
        Command::Bench { kind } => bench(kind, cli.seed, cli.threads),
        Command::Train(args) => train(&args, cli.seed, cli.threads),
        Command::Sweep(args) => sweep(&args, cli.seed, cli.threads),
    }
}

fn echo(config: &serde_json::Value) {
    println!("config: {config}");
}

fn verify(suite: Option<&str>, seed: u64) -> CliResult<bool> {
    let names: Vec<&str> = match suite {
        Some(s) => vec![s],
        None => sparsefly::verify::SUITES.to_vec(),
    };
    echo(&json!({ "command": "verify", "suites": names, "seed": seed }));
    let mut ok = true;
    for name in names {
        let r = sparsefly::verify::run_suite(name, seed)?;
        println!("{r}");
        ok &= r.passed;
    }
    println!("{}", if ok { "all suites passed" } else { "verification FAILED" });
    Ok(ok)
}

/// `256..4096` (doubling) or a comma list.
fn parse_sizes(s: &str) -> CliResult<Vec<usize>> {
    let bad = || CliError::Usage(format!("invalid size list '{s}'"));
    let mut sizes: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let (lo, hi): (usize, usize) = (
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        );
        if !lo.is_power_of_two() || !hi.is_power_of_two() || lo > hi {
            return Err(CliError::Usage(format!("range '{s}' needs powers of two, low <= high")));
        }
        std::iter::successors(Some(lo), |&n| (n < hi).then_some(n * 2)).collect()
    } else {
        s.split(',')
            .map(|v| v.trim().parse().map_err(|_| bad()))
            .collect::<CliResult<_>>()?
    };
    sizes.sort_unstable();
    sizes.dedup();
    Ok(sizes)
}

fn bench(kind: BenchKind, seed: u64, threads: usize) -> CliResult<bool> {
    let base = BenchSpec {
        seed,
        threads,
        ..BenchSpec::default()
    };
    let (spec, common) = match kind {
        BenchKind::Layers {
            sizes,
            methods,
            batch,
            block,
            rank,
            common,
        } => (
            BenchSpec {
                kernel: "layers".into(),
                sizes: parse_sizes(&sizes)?,
                methods,
                batch,
                block,
                rank,
                ..base
            },
            common,
        ),
        BenchKind::Skew { n, skews, common } => (
            BenchSpec {
                kernel: "skew".into(),
                sizes: vec![n],
                skews,
                ..base
            },
            common,
        ),
        BenchKind::Sparse {
            n,
            sparsities,
            k,
            common,
        } => (
            BenchSpec {
                kernel: "sparse".into(),
                sizes: vec![n],
                sparsities,
                rhs_cols: k,
                ..base
            },
            common,
        ),
    };
    let spec = BenchSpec {
        iters: common.iters,
        warmup: common.warmup,
        ..spec
    };
    let config = serde_json::to_value(&spec).expect("spec serializes");
    echo(&config);
    let records = match spec.kernel.as_str() {
        "layers" => bench_layers(&spec)?,
        "skew" => bench_skewed_mm(&spec)?,
        _ => bench_sparse_mm(&spec)?,
    };
    print_records(&records);
    if spec.kernel == "layers" {
        for m in spec.methods.iter().filter(|&&m| m != LayerMethod::Dense) {
            let series = speedup_series(&records, m.name());
            match break_even(&series) {
                Some(n) => println!("{m}: faster than dense from N = {n}"),
                None => println!("{m}: no break-even in the measured range"),
            }
        }
    }
    emit(&spec, &config, &records, &common)?;
    Ok(records.iter().all(|r| !r.is_failed()))
}

fn print_records(records: &[BenchRecord]) {
    println!(
        "{:<8} {:<10} {:>6} {:>6} {:>6} {:>8} {:>12} {:>10} {:>10} {:>9}  status",
        "kernel", "method", "n", "m", "k", "sparsity", "mean_ms", "std_ms", "gflops", "speedup"
    );
    let opt = |v: Option<usize>| v.map_or("-".to_string(), |v| v.to_string());
    for r in records {
        println!(
            "{:<8} {:<10} {:>6} {:>6} {:>6} {:>8} {:>12.5} {:>10.5} {:>10.3} {:>9}  {}",
            r.kernel,
            r.method,
            r.n,
            opt(r.m),
            opt(r.k),
            r.sparsity.map_or("-".to_string(), |s| s.to_string()),
            r.mean_ms,
            r.std_ms,
            r.throughput_gflops,
            r.speedup_vs_dense.map_or("-".to_string(), |s| format!("{s:.2}")),
            r.status
        );
    }
}

fn emit(spec: &BenchSpec, config: &serde_json::Value, records: &[BenchRecord], common: &BenchCommon) -> CliResult<()> {
    let ext = match common.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let out = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("bench_{}.{ext}", spec.kernel)));
    match common.format {
        Format::Csv => write_csv(&out, records, Some(&format!("seed={} config={config}", spec.seed)))?,
        Format::Json => write_json(
            &out,
            &Report {
                seed: spec.seed,
                threads: spec.threads,
                config: config.clone(),
                records: records.to_vec(),
            },
        )?,
    }
    println!("report: {}", out.display());
    if let Some(dir) = &common.plot_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        if spec.kernel == "layers" {
            for m in spec.methods.iter().filter(|&&m| m != LayerMethod::Dense) {
                let p = dir.join(format!("speedup_{m}.dat"));
                write_plot_data(&p, &speedup_plot_data(records, m.name()))?;
                println!("plot data: {}", p.display());
            }
        } else if spec.kernel == "skew" {
            let p = dir.join("throughput_skew.dat");
            write_plot_data(&p, &throughput_plot_data(records))?;
            println!("plot data: {}", p.display());
        }
    }
    Ok(())
}

fn load_splits(data: &DataArgs, val_fraction: f64, seed: u64) -> CliResult<Splits> {
    let mut rng = Rng::seed_from_u64(seed).fork(0xDA7A);
    let (pool, test): (Dataset, Dataset) = match (&data.data, data.synthetic) {
        (Some(dir), _) => load_cifar10(dir)?,
        (None, true) => {
            let n_test = (data.synthetic_samples / 5).max(NUM_CLASSES);
            let all = synthetic_dataset(data.synthetic_samples + n_test, NUM_CLASSES, &mut rng)?;
            let cut = data.synthetic_samples;
            (
                all.select(&(0..cut).collect::<Vec<_>>()),
                all.select(&(cut..all.len()).collect::<Vec<_>>()),
            )
        }
        (None, false) => return Err(CliError::Usage("pass --data <dir> or --synthetic".into())),
    };
    let (train, val) = pool.split_validation(val_fraction, &mut rng)?;
    Ok(Splits { train, val, test })
}

fn train_config(h: &HyperArgs, seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: h.lr,
        momentum: h.momentum,
        batch_size: h.batch_size,
        validation_fraction: h.val_fraction,
        epochs: h.epochs,
        seed,
    }
}

fn train(args: &TrainArgs, seed: u64, threads: usize) -> CliResult<bool> {
    let model_cfg = ModelConfig {
        method: args.method,
        rank: args.rank,
        pixelfly: PixelflyConfig {
            block: args.pixelfly_block,
            rank: args.pixelfly_rank,
            levels: args.pixelfly_levels,
            bias: true,
        },
        ..ModelConfig::default()
    };
    let train_cfg = train_config(&args.hyper, seed);
    let config = json!({
        "command": "train",
        "model": model_cfg,
        "train": train_cfg,
        "data": match &args.data.data {
            Some(d) => json!({ "cifar10": d }),
            None => json!({ "synthetic_samples": args.data.synthetic_samples }),
        },
        "precision": format!("{:?}", args.precision).to_lowercase(),
        "threads": threads,
    });
    echo(&config);
    let splits = load_splits(&args.data, args.hyper.val_fraction, seed)?;
    println!(
        "data: {} train, {} validation, {} test samples",
        splits.train.len(),
        splits.val.len(),
        splits.test.len()
    );
    match args.precision {
        Precision::F32 => train_typed::<f32>(args, &model_cfg, &train_cfg, &splits, &config),
        Precision::F64 => train_typed::<f64>(args, &model_cfg, &train_cfg, &splits, &config),
    }
}

fn open(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn train_typed<T: Scalar>(
    args: &TrainArgs,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    splits: &Splits,
    config: &serde_json::Value,
) -> CliResult<bool> {
    let mut model = ShlModel::<T>::new(model_cfg, &mut Rng::seed_from_u64(train_cfg.seed))?;
    let params = model.count_params();
    println!(
        "model: {} first layer, {} + {} = {} parameters",
        model_cfg.method, params.layer1, params.layer2, params.total
    );

    let mut timing_path = args.metrics.clone().into_os_string();
    timing_path.push(".timing");
    let timing_path = PathBuf::from(timing_path);
    let mut metrics = open(&args.metrics)?;
    let mut timing = open(&timing_path)?;
    writeln!(metrics, "{}", json!({ "config": config })).context("writing metrics")?;
    writeln!(timing, "{}", json!({ "config": config })).context("writing timings")?;

    let mut io_err = None;
    let outcome = train_shl(&mut model, splits, train_cfg, |m, t| {
        println!(
            "epoch {:>3}  loss {:.5}  train_acc {:.4}  val_acc {:.4}{}  layer1 {:.1} ms  elapsed {:.1} s",
            m.epoch,
            m.train_loss,
            m.train_acc,
            m.val_acc,
            m.test_acc.map_or(String::new(), |a| format!("  test_acc {a:.4}")),
            t.layer1_time_ms,
            t.cumulative_time_s
        );
        let res = writeln!(metrics, "{}", serde_json::to_string(m).expect("metrics serialize"))
            .and_then(|_| writeln!(timing, "{}", serde_json::to_string(t).expect("timing serializes")))
            .and_then(|_| metrics.flush())
            .and_then(|_| timing.flush());
        if let Err(e) = res {
            io_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = io_err {
        return Err(CliError::Failed(anyhow::Error::new(e).context("writing metrics")));
    }
    println!(
        "metrics: {}  timings: {}",
        args.metrics.display(),
        timing_path.display()
    );

    if let Some(path) = &args.checkpoint {
        let meta = CheckpointMeta {
            seed: train_cfg.seed,
            epoch: outcome.history.len(),
            history: outcome.history.clone(),
        };
        save_checkpoint(path, &model, &meta)?;
        println!("checkpoint: {}", path.display());
    }
    println!(
        "result: n_params {}  compression {:.2}%  test_acc {:.4}  total_time {:.2} s",
        params.total,
        100.0 * params.compression(),
        outcome.test_acc,
        outcome.total_time_s
    );
    Ok(true)
}

fn sweep(args: &SweepArgs, seed: u64, threads: usize) -> CliResult<bool> {
    let grid = SweepGrid {
        n: sparsefly::train::FEATURES,
        levels: args.levels.clone(),
        blocks: args.blocks.clone(),
        ranks: args.ranks.clone(),
    };
    let train_cfg = train_config(&args.hyper, seed);
    echo(&json!({ "command": "sweep", "grid": grid, "train": train_cfg, "threads": threads }));
    if grid.cells().is_empty() {
        return Err(CliError::Usage("sweep grid is empty".into()));
    }
    let splits = load_splits(&args.data, args.hyper.val_fraction, seed)?;
    let mut evaluate = training_evaluator(&splits, &train_cfg, grid.n);
    let report = sweep_pixelfly(&grid, |cell| {
        let r = evaluate(cell);
        match &r {
            Ok(m) => println!(
                "cell levels={} block={} rank={}  time {:.1} ms  acc {:.4}",
                cell.levels, cell.block, cell.rank, m.time_ms, m.accuracy
            ),
            Err(e) => println!(
                "cell levels={} block={} rank={}  failed: {e}",
                cell.levels, cell.block, cell.rank
            ),
        }
        r
    })?;
    for c in report.cells.iter().filter(|c| c.status.starts_with("skipped")) {
        println!(
            "cell levels={} block={} rank={}  {}",
            c.cell.levels, c.cell.block, c.cell.rank, c.status
        );
    }
    println!(
        "{:<8} {:>14} {:>14} {:>14}",
        "varied", "max_std_time", "max_std_acc", "max_std_params"
    );
    for s in &report.summaries {
        println!(
            "{:<8} {:>14.4} {:>14.6} {:>14.1}",
            s.varied.name(),
            s.max_std[0],
            s.max_std[1],
            s.max_std[2]
        );
    }
    let text = serde_json::to_string_pretty(&json!({ "seed": seed, "train": train_cfg, "report": report }))
        .context("serializing sweep report")?;
    std::fs::write(&args.out, text).with_context(|| format!("writing {}", args.out.display()))?;
    println!("report: {}", args.out.display());
    Ok(report.cells.iter().all(|c| !c.status.starts_with("failed")))
}
