//! Single-hidden-layer classifier: data, model, loss, optimizer, training
//! loop and checkpoints.

mod checkpoint;
mod data;
mod loss;
mod model;
mod optim;
mod trainer;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, CHECKPOINT_VERSION};
pub use data::{
    grayscale, load_cifar10, parse_cifar_records, read_cifar_batch, synthetic_dataset, Dataset, Splits,
    CIFAR_RECORD_BYTES, FEATURES, NUM_CLASSES,
};
pub use loss::cross_entropy;
pub use model::{FirstLayer, Method, ModelConfig, ParamBreakdown, ParamGrads, ShlModel, BASELINE_PARAMS};
pub use optim::{sgd_momentum_step, SgdMomentum};
pub use trainer::{evaluate, train_shl, EpochMetrics, EpochTiming, TrainConfig, TrainOutcome};
