//! Acceptance criteria 1-11, one PASS/FAIL line each. Runs without the test
//! harness so the lines come out in order and are always visible.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use sparsefly::bench::{
    bench_layers, bench_sparse_mm, break_even, speedup_series, sweep_pixelfly, BenchSpec, CellMetrics, LayerMethod,
    SweepCell, SweepGrid, SweepParam,
};
use sparsefly::train::{
    load_checkpoint, save_checkpoint, synthetic_dataset, train_shl, CheckpointMeta, Dataset, Method, ModelConfig,
    ShlModel, Splits, TrainConfig, BASELINE_PARAMS,
};
use sparsefly::verify::{suite_butterfly, suite_counts, suite_fft, suite_grad, suite_mask};
use sparsefly::{DenseMatrix, Rng};

const SEED: u64 = 0;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

fn run(id: usize, name: &str, budget_s: Option<f64>, f: impl FnOnce() -> Result<Outcome>) -> bool {
    let start = Instant::now();
    let outcome = f().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
    let secs = start.elapsed().as_secs_f64();
    let over = budget_s.is_some_and(|b| secs > b);
    let passed = outcome.passed && !over;
    let budget = budget_s.map(|b| format!(" budget={b:.0}s")).unwrap_or_default();
    println!(
        "{} {id:>2} {name:<22} {}{} [{secs:.1}s{budget}]",
        if passed { "PASS" } else { "FAIL" },
        outcome.detail,
        if over { " (over time budget)" } else { "" },
    );
    passed
}

fn suite_outcome(r: sparsefly::verify::SuiteResult) -> Outcome {
    Outcome::new(
        r.passed,
        format!(
            "cases={} max_err={:.3e} tol={:.0e} {}",
            r.cases, r.max_error, r.tolerance, r.detail
        ),
    )
}

fn butterfly_equivalence() -> Result<Outcome> {
    Ok(suite_outcome(suite_butterfly(200, SEED)?))
}

fn fft_specialization() -> Result<Outcome> {
    Ok(suite_outcome(suite_fft(SEED)?))
}

fn operation_counts() -> Result<Outcome> {
    Ok(suite_outcome(suite_counts()?))
}

fn gradients() -> Result<Outcome> {
    Ok(suite_outcome(suite_grad(SEED)?))
}

fn mask_formula() -> Result<Outcome> {
    Ok(suite_outcome(suite_mask()?))
}

fn compression() -> Result<Outcome> {
    let mut ok = true;
    let mut parts = Vec::new();
    for method in Method::ALL {
        let model = ShlModel::<f32>::new(&ModelConfig::with_method(method), &mut Rng::seed_from_u64(SEED))?;
        let count = model.count_params();
        let frac = count.total as f64 / BASELINE_PARAMS as f64;
        ok &= match method {
            Method::Baseline => count.total == BASELINE_PARAMS,
            Method::Butterfly => frac <= 0.035,
            Method::LowRank | Method::Circulant | Method::Fastfood => frac < 0.02,
            Method::Pixelfly => frac < 0.40,
        };
        parts.push(format!("{}={} ({:.2}%)", method.name(), count.total, 100.0 * frac));
    }
    Ok(Outcome::new(ok, parts.join(" ")))
}

fn speedup_crossover() -> Result<Outcome> {
    let spec = BenchSpec {
        sizes: (4..=12).map(|k| 1usize << k).collect(),
        methods: vec![LayerMethod::Dense, LayerMethod::Butterfly],
        batch: 1,
        warmup: 3,
        iters: 60,
        seed: SEED,
        ..BenchSpec::default()
    };
    let records = bench_layers(&spec)?;
    if let Some(r) = records.iter().find(|r| r.is_failed() || r.is_skipped()) {
        return Ok(Outcome::new(false, format!("{} N={}: {}", r.method, r.n, r.status)));
    }
    let series = speedup_series(&records, "butterfly");
    let Some(from) = break_even(&series) else {
        return Ok(Outcome::new(false, "butterfly never faster than dense"));
    };
    let tail: Vec<f64> = series.iter().filter(|p| p.0 >= from).map(|p| p.1).collect();
    let monotone = tail.windows(2).all(|w| w[1] >= w[0]);
    let at_4096 = series.iter().find(|p| p.0 == 4096).map_or(0.0, |p| p.1);
    let trend = series
        .iter()
        .map(|(n, s)| format!("{n}:{s:.1}"))
        .collect::<Vec<_>>()
        .join(" ");
    Ok(Outcome::new(
        at_4096 >= 10.0 && monotone,
        format!("speedup@4096={at_4096:.1} break_even={from} monotone={monotone} [{trend}]"),
    ))
}

fn sparse_sanity() -> Result<Outcome> {
    let spec = BenchSpec {
        kernel: "sparse".into(),
        sizes: vec![2048],
        sparsities: vec![0.99],
        rhs_cols: 64,
        warmup: 1,
        iters: 5,
        seed: SEED,
        ..BenchSpec::default()
    };
    let records = bench_sparse_mm(&spec)?;
    let get = |m: &str| records.iter().find(|r| r.method == m).cloned();
    let (Some(dense), Some(csr)) = (get("dense"), get("csr")) else {
        return Ok(Outcome::new(false, "missing records"));
    };
    let agree = !csr.is_failed();
    let faster = csr.mean_ms < dense.mean_ms;
    Ok(Outcome::new(
        agree && faster,
        format!(
            "n=2048 k=64 sparsity=0.99 dense={:.3}ms csr={:.3}ms all_instances_within_1e-12={agree}",
            dense.mean_ms, csr.mean_ms
        ),
    ))
}

fn blobs(seed: u64) -> Result<Splits> {
    let mut rng = Rng::seed_from_u64(seed);
    let all = synthetic_dataset(1500, 10, &mut rng)?;
    let test = all.select(&(1400..1500).collect::<Vec<_>>());
    let (train, val) = all
        .select(&(0..1400).collect::<Vec<_>>())
        .split_validation(0.15, &mut rng)?;
    Ok(Splits { train, val, test })
}

fn cifar_dir() -> PathBuf {
    std::env::var_os("SPARSEFLY_CIFAR_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/cifar-10-batches-bin"))
}

fn training_smoke() -> Result<Outcome> {
    let splits = blobs(3)?;
    let mut model = ShlModel::<f32>::new(&ModelConfig::default(), &mut Rng::seed_from_u64(3))?;
    let cfg = TrainConfig {
        epochs: 5,
        ..TrainConfig::default()
    };
    let t = Instant::now();
    let out = train_shl(&mut model, &splits, &cfg, |_, _| {})?;
    let secs_a = t.elapsed().as_secs_f64();
    let acc_a = out.history.last().map_or(0.0, |h| h.train_acc);
    let pass_a = acc_a >= 0.9 && secs_a <= 60.0;
    let detail_a = format!("(a) dense blobs train_acc={:.3} in {secs_a:.1}s", acc_a);

    let dir = cifar_dir();
    if !dir.join("data_batch_1.bin").is_file() {
        return Ok(Outcome::new(
            pass_a,
            format!(
                "{detail_a}; (b) not run: CIFAR-10 binaries not found at {}",
                dir.display()
            ),
        ));
    }
    let (train_all, test) = sparsefly::train::load_cifar10(&dir)?;
    let (train, val) = train_all.split_validation(0.15, &mut Rng::seed_from_u64(SEED).fork(0xDA7A))?;
    let splits = Splits { train, val, test };
    let mut model = ShlModel::<f32>::new(
        &ModelConfig::with_method(Method::Butterfly),
        &mut Rng::seed_from_u64(SEED),
    )?;
    let cfg = TrainConfig {
        epochs: 10,
        ..TrainConfig::default()
    };
    let t = Instant::now();
    let out = train_shl(&mut model, &splits, &cfg, |_, _| {})?;
    let secs_b = t.elapsed().as_secs_f64();
    let pass_b = out.test_acc >= 0.30 && secs_b <= 3600.0;
    Ok(Outcome::new(
        pass_a && pass_b,
        format!(
            "{detail_a}; (b) butterfly CIFAR-10 test_acc={:.3} in {secs_b:.0}s",
            out.test_acc
        ),
    ))
}

fn cli_train(dir: &Path, tag: &str) -> Result<(Vec<u8>, PathBuf)> {
    let metrics = dir.join(format!("{tag}.ndjson"));
    let ckpt = dir.join(format!("{tag}.ckpt"));
    let status = Command::new(env!("CARGO_BIN_EXE_sparsefly"))
        .args([
            "--seed",
            "7",
            "--threads",
            "1",
            "train",
            "--synthetic",
            "--epochs",
            "3",
            "--metrics",
        ])
        .arg(&metrics)
        .arg("--checkpoint")
        .arg(&ckpt)
        .output()
        .context("running sparsefly train")?;
    if !status.status.success() {
        bail!(
            "train exited with {}: {}",
            status.status,
            String::from_utf8_lossy(&status.stderr)
        );
    }
    let bytes = std::fs::read(&metrics).context("reading metrics log")?;
    Ok((bytes, ckpt))
}

fn bits(m: &DenseMatrix<f32>) -> Vec<u32> {
    m.as_slice().iter().map(|v| v.to_bits()).collect()
}

fn determinism() -> Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let (first, ckpt) = cli_train(dir.path(), "a")?;
    let (second, _) = cli_train(dir.path(), "b")?;
    let logs_equal = first == second && !first.is_empty();
    let ckpts_equal = std::fs::read(&ckpt).ok() == std::fs::read(dir.path().join("b.ckpt")).ok();

    // Round trip every method after a short training run.
    let splits = blobs(5)?;
    let probe: &Dataset = &splits.test;
    let cfg = TrainConfig {
        epochs: 1,
        seed: 7,
        ..TrainConfig::default()
    };
    let mut round_trips = 0;
    for method in Method::ALL {
        let config = ModelConfig {
            rank: 4,
            pixelfly: sparsefly::pixelfly::PixelflyConfig {
                block: 32,
                rank: 4,
                ..Default::default()
            },
            ..ModelConfig::with_method(method)
        };
        let mut model = ShlModel::<f32>::new(&config, &mut Rng::seed_from_u64(7))?;
        let out = train_shl(&mut model, &splits, &cfg, |_, _| {})?;
        let path = dir.path().join(format!("{}.ckpt", method.name()));
        save_checkpoint(
            &path,
            &model,
            &CheckpointMeta {
                seed: 7,
                epoch: 1,
                history: out.history,
            },
        )?;
        let (loaded, _) = load_checkpoint::<f32>(&path)?;
        if bits(&model.logits(&probe.features)?) == bits(&loaded.logits(&probe.features)?) {
            round_trips += 1;
        }
    }
    let (cli_model, meta) = load_checkpoint::<f32>(&ckpt)?;
    let cli_ok = meta.epoch == 3 && meta.seed == 7 && cli_model.logits(&probe.features).is_ok();
    Ok(Outcome::new(
        logs_equal && ckpts_equal && round_trips == Method::ALL.len() && cli_ok,
        format!(
            "metrics_identical={logs_equal} ({} bytes) checkpoints_identical={ckpts_equal} \
             bit_exact_round_trips={round_trips}/{} cli_checkpoint_loads={cli_ok}",
            first.len(),
            Method::ALL.len()
        ),
    ))
}

fn injected(cell: &SweepCell) -> sparsefly::Result<CellMetrics> {
    let h = (cell.levels * 131 + cell.block * 17 + cell.rank * 7) % 23;
    Ok(CellMetrics {
        time_ms: 0.75 * cell.levels as f64
            + 0.125 * cell.block as f64
            + 0.001 * (cell.rank * cell.rank) as f64
            + 0.05 * h as f64,
        accuracy: 0.25 + 0.011 * h as f64,
    })
}

/// Two-pass population mean and standard deviation.
fn oracle(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn sweep_harness() -> Result<Outcome> {
    let grid = SweepGrid {
        n: 1024,
        levels: vec![1, 2, 4, 7],
        blocks: vec![8, 16, 32],
        ranks: vec![2, 4, 64, 128],
    };
    let report = sweep_pixelfly(&grid, injected)?;
    let mut worst: f64 = 0.0;
    let mut groups_checked = 0;
    for summary in &report.summaries {
        let varied = summary.varied;
        let mut oracle_groups: BTreeMap<Vec<usize>, Vec<[f64; 3]>> = BTreeMap::new();
        for rec in report.cells.iter().filter(|c| c.status == "ok") {
            let cell = rec.cell;
            let m = injected(&cell)?;
            let params = rec.n_params.unwrap_or(0) as f64;
            let key = SweepParam::ALL
                .into_iter()
                .filter(|&p| p != varied)
                .map(|p| cell.get(p))
                .collect();
            oracle_groups
                .entry(key)
                .or_default()
                .push([m.time_ms, m.accuracy, params]);
        }
        if oracle_groups.len() != summary.groups.len() {
            return Ok(Outcome::new(
                false,
                format!("group count differs for {}", varied.name()),
            ));
        }
        let mut max_std = [0.0f64; 3];
        let mut mean_of_means = [0.0f64; 3];
        for (group, (key, rows)) in summary.groups.iter().zip(&oracle_groups) {
            let held: Vec<usize> = group.held.iter().map(|h| h.1).collect();
            if &held != key || group.runs != rows.len() {
                return Ok(Outcome::new(
                    false,
                    format!("group layout differs for {}", varied.name()),
                ));
            }
            let got = [group.time_ms, group.accuracy, group.n_params];
            for i in 0..3 {
                let col: Vec<f64> = rows.iter().map(|r| r[i]).collect();
                let (m, s) = oracle(&col);
                let scale = m.abs().max(1.0);
                worst = worst
                    .max((got[i].mean - m).abs() / scale)
                    .max((got[i].std - s).abs() / scale);
                max_std[i] = max_std[i].max(s);
                mean_of_means[i] += m / oracle_groups.len() as f64;
            }
            groups_checked += 1;
        }
        for i in 0..3 {
            let scale = mean_of_means[i].abs().max(1.0);
            worst = worst
                .max((summary.max_std[i] - max_std[i]).abs() / scale)
                .max((summary.mean[i] - mean_of_means[i]).abs() / scale);
        }
    }

    // Parameter deltas across the rank sweep at fixed levels and block.
    let mut delta_ok = true;
    let mut deltas = 0;
    for &levels in &grid.levels {
        for &block in &grid.blocks {
            let row: Vec<(usize, usize)> = grid
                .ranks
                .iter()
                .filter_map(|&rank| {
                    let c = report
                        .cells
                        .iter()
                        .find(|c| c.cell == SweepCell { levels, block, rank })?;
                    Some((rank, c.n_params?))
                })
                .collect();
            for w in row.windows(2) {
                let (r0, p0) = w[0];
                let (r1, p1) = w[1];
                delta_ok &= p1 as i64 - p0 as i64 == 2 * 1024 * (r1 as i64 - r0 as i64);
                deltas += 1;
            }
        }
    }
    let skipped = report.cells.iter().filter(|c| c.status != "ok").count();
    Ok(Outcome::new(
        worst <= 1e-12 && delta_ok && deltas > 0,
        format!("skipped_cells={skipped} groups={groups_checked} max_stat_err={worst:.2e} rank_deltas_exact={delta_ok} ({deltas} pairs)"),
    ))
}

fn main() -> ExitCode {
    // Honour `cargo test -- <filter>` style invocations that list tests.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let results = [
        run(1, "butterfly-dense", Some(60.0), butterfly_equivalence),
        run(2, "fft-specialization", Some(60.0), fft_specialization),
        run(3, "operation-counts", None, operation_counts),
        run(4, "gradient-checks", Some(120.0), gradients),
        run(5, "pixelfly-mask", None, mask_formula),
        run(6, "compression", None, compression),
        run(7, "speedup-crossover", None, speedup_crossover),
        run(8, "sparse-benchmark", Some(120.0), sparse_sanity),
        run(9, "training-smoke", None, training_smoke),
        run(10, "determinism", None, determinism),
        run(11, "sweep-harness", None, sweep_harness),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
