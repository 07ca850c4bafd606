use std::path::Path;

use crate::tensor::{DenseMatrix, Rng};
use crate::{Error, Result};

/// Pixels per grayscale 32×32 image.
pub const FEATURES: usize = 1024;
pub const NUM_CLASSES: usize = 10;
/// Label byte plus three 32×32 colour planes.
pub const CIFAR_RECORD_BYTES: usize = 1 + 3 * FEATURES;

const TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
const TEST_FILE: &str = "test_batch.bin";

/// Feature rows in `[0, 1]` with a class label per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: DenseMatrix<f32>,
    pub labels: Vec<u8>,
}

/// Train, validation and test partitions.
#[derive(Clone, Debug, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

impl Dataset {
    pub fn new(features: DenseMatrix<f32>, labels: Vec<u8>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
            return Err(Error::Format(format!("label {bad} out of range")));
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Rows selected by `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> Dataset {
        let dim = self.dim();
        let mut data = Vec::with_capacity(idx.len() * dim);
        for &i in idx {
            data.extend_from_slice(self.features.row(i));
        }
        Dataset {
            features: DenseMatrix::from_vec(idx.len(), dim, data).expect("sizes agree"),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn concat(parts: &[Dataset]) -> Result<Dataset> {
        let dim = parts.first().map_or(FEATURES, Dataset::dim);
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for p in parts {
            if p.dim() != dim {
                return Err(Error::InvalidArgument("datasets differ in feature width".into()));
            }
            data.extend_from_slice(p.features.as_slice());
            labels.extend_from_slice(&p.labels);
        }
        Dataset::new(DenseMatrix::from_vec(labels.len(), dim, data)?, labels)
    }

    /// Shuffle with `rng`, then hold out the last `fraction` as validation.
    pub fn split_validation(&self, fraction: f64, rng: &mut Rng) -> Result<(Dataset, Dataset)> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::InvalidArgument(format!(
                "validation fraction {fraction} not in [0, 1)"
            )));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        rng.shuffle(&mut idx);
        let n_val = (self.len() as f64 * fraction).round() as usize;
        let cut = self.len() - n_val;
        Ok((self.select(&idx[..cut]), self.select(&idx[cut..])))
    }
}

/// Channel mean of one pixel scaled to `[0, 1]`.
pub fn grayscale(r: u8, g: u8, b: u8) -> f32 {
    ((r as f64 + g as f64 + b as f64) / (3.0 * 255.0)) as f32
}

/// Decode concatenated CIFAR-10 binary records.
pub fn parse_cifar_records(bytes: &[u8]) -> Result<Dataset> {
    if !bytes.len().is_multiple_of(CIFAR_RECORD_BYTES) {
        return Err(Error::Format(format!(
            "{} bytes is not a multiple of the {CIFAR_RECORD_BYTES}-byte record size",
            bytes.len()
        )));
    }
    let n = bytes.len() / CIFAR_RECORD_BYTES;
    let mut features = Vec::with_capacity(n * FEATURES);
    let mut labels = Vec::with_capacity(n);
    for (i, rec) in bytes.chunks_exact(CIFAR_RECORD_BYTES).enumerate() {
        if rec[0] as usize >= NUM_CLASSES {
            return Err(Error::Format(format!("record {i} has label byte {}", rec[0])));
        }
        labels.push(rec[0]);
        let (r, rest) = rec[1..].split_at(FEATURES);
        let (g, b) = rest.split_at(FEATURES);
        features.extend((0..FEATURES).map(|p| grayscale(r[p], g[p], b[p])));
    }
    Dataset::new(DenseMatrix::from_vec(n, FEATURES, features)?, labels)
}

pub fn read_cifar_batch(path: &Path) -> Result<Dataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_cifar_records(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// The five training batches and the test batch from a CIFAR-10 binary
/// directory, as `(train, test)`.
pub fn load_cifar10(dir: &Path) -> Result<(Dataset, Dataset)> {
    let train: Vec<Dataset> = TRAIN_FILES
        .iter()
        .map(|f| read_cifar_batch(&dir.join(f)))
        .collect::<Result<_>>()?;
    let test = read_cifar_batch(&dir.join(TEST_FILE))?;
    Ok((Dataset::concat(&train)?, test))
}

/// Gaussian blobs: one mean per class drawn from `U[0.2, 0.8]^1024`, samples
/// at standard deviation 0.1 clipped to `[0, 1]`, labels cycling through
/// the classes and then shuffled.
pub fn synthetic_dataset(n_samples: usize, n_classes: usize, rng: &mut Rng) -> Result<Dataset> {
    if n_classes == 0 || n_classes > NUM_CLASSES || n_samples < n_classes {
        return Err(Error::InvalidArgument(format!(
            "need 1..={NUM_CLASSES} classes and at least one sample per class, got {n_samples} samples, {n_classes} classes"
        )));
    }
    let means: Vec<Vec<f64>> = (0..n_classes)
        .map(|_| (0..FEATURES).map(|_| rng.uniform(0.2, 0.8)).collect())
        .collect();
    let mut labels: Vec<u8> = (0..n_samples).map(|i| (i % n_classes) as u8).collect();
    rng.shuffle(&mut labels);
    let mut data = Vec::with_capacity(n_samples * FEATURES);
    for &l in &labels {
        data.extend(
            means[l as usize]
                .iter()
                .map(|&m| (m + 0.1 * rng.normal()).clamp(0.0, 1.0) as f32),
        );
    }
    Dataset::new(DenseMatrix::from_vec(n_samples, FEATURES, data)?, labels)
}
