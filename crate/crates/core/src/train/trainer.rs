use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::data::{Dataset, Splits};
use super::model::ShlModel;
use super::optim::SgdMomentum;
use crate::tensor::{DenseMatrix, Rng, Scalar};
use crate::{Error, Result};

/// Optimisation hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub validation_fraction: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            momentum: 0.9,
            batch_size: 50,
            validation_fraction: 0.15,
            epochs: 30,
            seed: 0,
        }
    }
}

/// Deterministic per-epoch metrics. `test_acc` is present on the last epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_acc: Option<f64>,
}

/// Wall-clock measurements for one epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochTiming {
    pub epoch: usize,
    /// First-layer forward plus backward time.
    pub layer1_time_ms: f64,
    pub cumulative_time_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub history: Vec<EpochMetrics>,
    pub timings: Vec<EpochTiming>,
    pub val_acc: f64,
    pub test_acc: f64,
    pub total_time_s: f64,
}

/// Fraction of `data` classified correctly, evaluated in chunks of `batch`.
pub fn evaluate<T: Scalar>(model: &ShlModel<T>, data: &Dataset, batch: usize) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0;
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(batch.max(1)) {
        let (x, labels) = batch_of(data, chunk);
        correct += model.predict(&x)?.iter().zip(&labels).filter(|(a, b)| a == b).count();
    }
    Ok(correct as f64 / data.len() as f64)
}

fn batch_of<T: Scalar>(data: &Dataset, idx: &[usize]) -> (DenseMatrix<T>, Vec<u8>) {
    let dim = data.dim();
    let x = DenseMatrix::from_fn(idx.len(), dim, |r, c| T::from_f64(data.features.get(idx[r], c) as f64));
    (x, idx.iter().map(|&i| data.labels[i]).collect())
}

/// Mini-batch SGD with momentum. Sample order per epoch comes from the
/// config seed, so runs are reproducible. `on_epoch` sees each epoch's
/// metrics and timing as soon as they are known.
pub fn train_shl<T: Scalar>(
    model: &mut ShlModel<T>,
    splits: &Splits,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics, &EpochTiming),
) -> Result<TrainOutcome> {
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let mut opt = SgdMomentum::<T>::new(config.learning_rate, config.momentum);
    let order_rng = Rng::seed_from_u64(config.seed).fork(0x5EED);
    let mut history = Vec::with_capacity(config.epochs);
    let mut timings = Vec::with_capacity(config.epochs);
    let start = Instant::now();
    let train = &splits.train;
    for epoch in 1..=config.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order_rng.fork(epoch as u64).shuffle(&mut order);
        let (mut loss_sum, mut correct) = (0.0, 0);
        let mut layer1_time = Duration::ZERO;
        for chunk in order.chunks(config.batch_size) {
            let (x, labels) = batch_of::<T>(train, chunk);
            let step = model.step(&x, &labels)?;
            if !step.loss.is_finite() {
                return Err(Error::Diverged { epoch, loss: step.loss });
            }
            loss_sum += step.loss * chunk.len() as f64;
            correct += step.correct;
            layer1_time += step.layer1_time;
            let grads: Vec<&[T]> = step.grads.iter().map(Vec::as_slice).collect();
            opt.step(model.params_mut(), &grads)?;
        }
        let n = train.len().max(1) as f64;
        let val_acc = evaluate(model, &splits.val, config.batch_size)?;
        let test_acc = if epoch == config.epochs {
            Some(evaluate(model, &splits.test, config.batch_size)?)
        } else {
            None
        };
        let metrics = EpochMetrics {
            epoch,
            train_loss: loss_sum / n,
            train_acc: correct as f64 / n,
            val_acc,
            test_acc,
        };
        let timing = EpochTiming {
            epoch,
            layer1_time_ms: layer1_time.as_secs_f64() * 1e3,
            cumulative_time_s: start.elapsed().as_secs_f64(),
        };
        on_epoch(&metrics, &timing);
        history.push(metrics);
        timings.push(timing);
    }
    let (val_acc, test_acc) = match history.last() {
        Some(m) => (m.val_acc, m.test_acc.unwrap_or_default()),
        None => (
            evaluate(model, &splits.val, config.batch_size)?,
            evaluate(model, &splits.test, config.batch_size)?,
        ),
    };
    Ok(TrainOutcome {
        history,
        timings,
        val_acc,
        test_acc,
        total_time_s: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::{synthetic_dataset, Method, ModelConfig};

    fn blobs(seed: u64) -> Splits {
        let mut rng = Rng::seed_from_u64(seed);
        let all = synthetic_dataset(1500, 10, &mut rng).unwrap();
        let test = all.select(&(1400..1500).collect::<Vec<_>>());
        let (train, val) = all
            .select(&(0..1400).collect::<Vec<_>>())
            .split_validation(0.15, &mut rng)
            .unwrap();
        Splits { train, val, test }
    }

    #[test]
    fn zero_epochs_is_near_chance() {
        let splits = blobs(0);
        let mut model = ShlModel::<f32>::new(&ModelConfig::default(), &mut Rng::seed_from_u64(1)).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let out = train_shl(&mut model, &splits, &cfg, |_, _| {}).unwrap();
        assert!(out.history.is_empty());
        assert!(out.val_acc <= 0.35, "{}", out.val_acc);
    }

    #[test]
    fn repeat_runs_match() {
        let splits = blobs(2);
        let cfg = TrainConfig {
            epochs: 2,
            seed: 7,
            ..TrainConfig::default()
        };
        let run = || {
            let mut model =
                ShlModel::<f32>::new(&ModelConfig::with_method(Method::Butterfly), &mut Rng::seed_from_u64(7)).unwrap();
            let out = train_shl(&mut model, &splits, &cfg, |_, _| {}).unwrap();
            (
                out.history,
                model.params().iter().map(|p| p.to_vec()).collect::<Vec<_>>(),
            )
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn dense_learns_blobs() {
        let splits = blobs(3);
        let mut model = ShlModel::<f32>::new(&ModelConfig::default(), &mut Rng::seed_from_u64(3)).unwrap();
        let cfg = TrainConfig {
            epochs: 5,
            ..TrainConfig::default()
        };
        let out = train_shl(&mut model, &splits, &cfg, |_, _| {}).unwrap();
        assert_eq!(out.history.len(), 5);
        assert!(out.history[4].train_acc >= 0.9, "{:?}", out.history);
        assert!(out.history[4].test_acc.is_some());
    }
}
