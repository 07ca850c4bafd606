use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::data::{FEATURES, NUM_CLASSES};
use super::loss::cross_entropy;
use crate::baselines::{CirculantLayer, DenseLinear, FastfoodLayer, LowRankLayer};
use crate::butterfly::{ButterflyInit, ButterflyLinear, Permutation};
use crate::layer::{Gradients, Layer};
use crate::pixelfly::{PixelflyConfig, PixelflyLayer};
use crate::tensor::{DenseMatrix, Field, Rng, Scalar};
use crate::{Error, Result};

/// Parameter count of the all-dense reference model.
pub const BASELINE_PARAMS: usize = 1_059_850;

/// First-layer family.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Baseline,
    Butterfly,
    Pixelfly,
    LowRank,
    Circulant,
    Fastfood,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Baseline,
        Method::Butterfly,
        Method::Pixelfly,
        Method::LowRank,
        Method::Circulant,
        Method::Fastfood,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::Butterfly => "butterfly",
            Method::Pixelfly => "pixelfly",
            Method::LowRank => "lowrank",
            Method::Circulant => "circulant",
            Method::Fastfood => "fastfood",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let valid: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
            Error::InvalidArgument(format!("unknown method '{s}' (valid: {})", valid.join(", ")))
        })
    }
}

/// Model shape. Every first layer carries an output bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub method: Method,
    pub input: usize,
    pub hidden: usize,
    pub classes: usize,
    /// Low-rank first-layer rank.
    pub rank: usize,
    pub pixelfly: PixelflyConfig,
    pub butterfly_init: ButterflyInit,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            method: Method::Baseline,
            input: FEATURES,
            hidden: FEATURES,
            classes: NUM_CLASSES,
            rank: 1,
            pixelfly: PixelflyConfig::default(),
            butterfly_init: ButterflyInit::Givens,
        }
    }
}

impl ModelConfig {
    pub fn with_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }
}

/// The swappable `input → hidden` layer.
#[derive(Clone, Debug)]
pub enum FirstLayer<T> {
    Dense(DenseLinear<T>),
    Butterfly(ButterflyLinear<T>),
    Pixelfly(PixelflyLayer<T>),
    LowRank(LowRankLayer<T>),
    Circulant(CirculantLayer<T>),
    Fastfood(FastfoodLayer<T>),
}

pub enum FirstCache<T: Scalar> {
    Dense(<DenseLinear<T> as Layer<T>>::Cache),
    Butterfly(<ButterflyLinear<T> as Layer<T>>::Cache),
    Pixelfly(<PixelflyLayer<T> as Layer<T>>::Cache),
    LowRank(<LowRankLayer<T> as Layer<T>>::Cache),
    Circulant(<CirculantLayer<T> as Layer<T>>::Cache),
    Fastfood(<FastfoodLayer<T> as Layer<T>>::Cache),
}

/// Owned parameter gradients plus the input gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads<T> {
    pub params: Vec<Vec<T>>,
    pub input: DenseMatrix<T>,
}

impl<T: Field> ParamGrads<T> {
    fn from_grads(g: &impl Gradients<T>) -> Self {
        Self {
            params: g.params().iter().map(|p| p.to_vec()).collect(),
            input: g.input().clone(),
        }
    }
}

impl<T: Field> Gradients<T> for ParamGrads<T> {
    fn params(&self) -> Vec<&[T]> {
        self.params.iter().map(Vec::as_slice).collect()
    }

    fn input(&self) -> &DenseMatrix<T> {
        &self.input
    }
}

macro_rules! dispatch {
    ($self:expr, $l:ident => $body:expr) => {
        match $self {
            FirstLayer::Dense($l) => $body,
            FirstLayer::Butterfly($l) => $body,
            FirstLayer::Pixelfly($l) => $body,
            FirstLayer::LowRank($l) => $body,
            FirstLayer::Circulant($l) => $body,
            FirstLayer::Fastfood($l) => $body,
        }
    };
}

impl<T: Scalar> FirstLayer<T> {
    pub fn new(config: &ModelConfig, rng: &mut Rng) -> Result<Self> {
        let (i, h) = (config.input, config.hidden);
        let square = || {
            if i == h {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "{} first layer needs input == hidden, got {i} and {h}",
                    config.method
                )))
            }
        };
        Ok(match config.method {
            Method::Baseline => FirstLayer::Dense(DenseLinear::new(i, h, true, rng)),
            Method::Butterfly => FirstLayer::Butterfly(ButterflyLinear::new(i, h, true, config.butterfly_init, rng)?),
            Method::Pixelfly => {
                square()?;
                let cfg = PixelflyConfig {
                    bias: true,
                    ..config.pixelfly.clone()
                };
                FirstLayer::Pixelfly(PixelflyLayer::new(h, &cfg, rng)?)
            }
            Method::LowRank => FirstLayer::LowRank(LowRankLayer::new(i, h, config.rank, true, rng)?),
            Method::Circulant => {
                square()?;
                FirstLayer::Circulant(CirculantLayer::new(h, true, rng)?)
            }
            Method::Fastfood => {
                square()?;
                FirstLayer::Fastfood(FastfoodLayer::new(h, true, rng)?)
            }
        })
    }

    pub fn method(&self) -> Method {
        match self {
            FirstLayer::Dense(_) => Method::Baseline,
            FirstLayer::Butterfly(_) => Method::Butterfly,
            FirstLayer::Pixelfly(_) => Method::Pixelfly,
            FirstLayer::LowRank(_) => Method::LowRank,
            FirstLayer::Circulant(_) => Method::Circulant,
            FirstLayer::Fastfood(_) => Method::Fastfood,
        }
    }

    /// Fixed (non-learnable) permutation, if the layer has one.
    pub fn permutation(&self) -> Option<&Permutation> {
        match self {
            FirstLayer::Butterfly(l) => Some(l.inner().permutation()),
            FirstLayer::Fastfood(l) => Some(l.permutation()),
            _ => None,
        }
    }

    pub fn set_permutation(&mut self, p: Permutation) -> Result<()> {
        match self {
            FirstLayer::Butterfly(l) => l.inner_mut().set_permutation(p),
            FirstLayer::Fastfood(l) => l.set_permutation(p),
            _ => Err(Error::InvalidArgument(format!(
                "{} layer has no permutation",
                self.method()
            ))),
        }
    }
}

impl<T: Scalar> Layer<T> for FirstLayer<T> {
    type Cache = FirstCache<T>;
    type Grads = ParamGrads<T>;

    fn in_dim(&self) -> usize {
        dispatch!(self, l => l.in_dim())
    }

    fn out_dim(&self) -> usize {
        dispatch!(self, l => l.out_dim())
    }

    fn forward(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        dispatch!(self, l => l.forward(x))
    }

    fn forward_cached(&self, x: &DenseMatrix<T>) -> Result<(DenseMatrix<T>, Self::Cache)> {
        Ok(match self {
            FirstLayer::Dense(l) => l.forward_cached(x).map(|(y, c)| (y, FirstCache::Dense(c)))?,
            FirstLayer::Butterfly(l) => l.forward_cached(x).map(|(y, c)| (y, FirstCache::Butterfly(c)))?,
            FirstLayer::Pixelfly(l) => l.forward_cached(x).map(|(y, c)| (y, FirstCache::Pixelfly(c)))?,
            FirstLayer::LowRank(l) => l.forward_cached(x).map(|(y, c)| (y, FirstCache::LowRank(c)))?,
            FirstLayer::Circulant(l) => l.forward_cached(x).map(|(y, c)| (y, FirstCache::Circulant(c)))?,
            FirstLayer::Fastfood(l) => l.forward_cached(x).map(|(y, c)| (y, FirstCache::Fastfood(c)))?,
        })
    }

    fn backward(&self, cache: &Self::Cache, dy: &DenseMatrix<T>) -> Result<Self::Grads> {
        Ok(match (self, cache) {
            (FirstLayer::Dense(l), FirstCache::Dense(c)) => ParamGrads::from_grads(&l.backward(c, dy)?),
            (FirstLayer::Butterfly(l), FirstCache::Butterfly(c)) => ParamGrads::from_grads(&l.backward(c, dy)?),
            (FirstLayer::Pixelfly(l), FirstCache::Pixelfly(c)) => ParamGrads::from_grads(&l.backward(c, dy)?),
            (FirstLayer::LowRank(l), FirstCache::LowRank(c)) => ParamGrads::from_grads(&l.backward(c, dy)?),
            (FirstLayer::Circulant(l), FirstCache::Circulant(c)) => ParamGrads::from_grads(&l.backward(c, dy)?),
            (FirstLayer::Fastfood(l), FirstCache::Fastfood(c)) => ParamGrads::from_grads(&l.backward(c, dy)?),
            _ => return Err(Error::MissingForwardCache),
        })
    }

    fn params(&self) -> Vec<&[T]> {
        dispatch!(self, l => l.params())
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        dispatch!(self, l => l.params_mut())
    }

    fn param_count(&self) -> usize {
        dispatch!(self, l => l.param_count())
    }
}

/// Per-layer learnable parameter counts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamBreakdown {
    pub layer1: usize,
    pub layer2: usize,
    pub total: usize,
}

impl ParamBreakdown {
    /// `1 − total / baseline`.
    pub fn compression(&self) -> f64 {
        1.0 - self.total as f64 / BASELINE_PARAMS as f64
    }

    /// `total / baseline`.
    pub fn fraction_of_baseline(&self) -> f64 {
        self.total as f64 / BASELINE_PARAMS as f64
    }
}

/// Result of one forward/backward pass over a batch.
#[derive(Clone, Debug)]
pub struct StepResult<T> {
    pub loss: f64,
    pub correct: usize,
    pub grads: Vec<Vec<T>>,
    /// Time spent in the first layer's forward and backward.
    pub layer1_time: Duration,
}

/// `input → first layer → ReLU → dense → logits`.
#[derive(Clone, Debug)]
pub struct ShlModel<T = f32> {
    config: ModelConfig,
    layer1: FirstLayer<T>,
    layer2: DenseLinear<T>,
}

impl<T: Scalar> ShlModel<T> {
    pub fn new(config: &ModelConfig, rng: &mut Rng) -> Result<Self> {
        let layer1 = FirstLayer::new(config, &mut rng.fork(1))?;
        let layer2 = DenseLinear::new(config.hidden, config.classes, true, &mut rng.fork(2));
        Ok(Self {
            config: config.clone(),
            layer1,
            layer2,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layer1(&self) -> &FirstLayer<T> {
        &self.layer1
    }

    pub fn layer1_mut(&mut self) -> &mut FirstLayer<T> {
        &mut self.layer1
    }

    pub fn layer2(&self) -> &DenseLinear<T> {
        &self.layer2
    }

    pub fn count_params(&self) -> ParamBreakdown {
        let (layer1, layer2) = (self.layer1.param_count(), self.layer2.param_count());
        ParamBreakdown {
            layer1,
            layer2,
            total: layer1 + layer2,
        }
    }

    /// First-layer slices followed by the second layer's weight and bias.
    pub fn params(&self) -> Vec<&[T]> {
        let mut p = self.layer1.params();
        p.extend(self.layer2.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut p = self.layer1.params_mut();
        p.extend(self.layer2.params_mut());
        p
    }

    /// Names matching [`ShlModel::params`].
    pub fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.layer1.params().len()).map(|i| format!("layer1.{i}")).collect();
        names.push("layer2.weight".into());
        names.push("layer2.bias".into());
        names
    }

    pub fn logits(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        let h = relu(self.layer1.forward(x)?);
        self.layer2.forward(&h)
    }

    /// Predicted class per row.
    pub fn predict(&self, x: &DenseMatrix<T>) -> Result<Vec<u8>> {
        Ok(argmax_rows(&self.logits(x)?))
    }

    /// Loss, accuracy count and gradients for one batch.
    pub fn step(&self, x: &DenseMatrix<T>, labels: &[u8]) -> Result<StepResult<T>> {
        let t0 = Instant::now();
        let (pre, c1) = self.layer1.forward_cached(x)?;
        let mut layer1_time = t0.elapsed();
        let h = relu(pre.clone());
        let (logits, c2) = self.layer2.forward_cached(&h)?;
        let (loss, dlogits) = cross_entropy(&logits, labels)?;
        let correct = argmax_rows(&logits).iter().zip(labels).filter(|(a, b)| a == b).count();
        let g2 = self.layer2.backward(&c2, &dlogits)?;
        let mut dh = g2.input.clone();
        for (d, &p) in dh.as_mut_slice().iter_mut().zip(pre.as_slice()) {
            if p <= T::zero() {
                *d = T::zero();
            }
        }
        let t1 = Instant::now();
        let g1 = self.layer1.backward(&c1, &dh)?;
        layer1_time += t1.elapsed();
        let mut grads = g1.params;
        grads.extend(g2.params().iter().map(|p| p.to_vec()));
        Ok(StepResult {
            loss,
            correct,
            grads,
            layer1_time,
        })
    }
}

fn relu<T: Scalar>(mut m: DenseMatrix<T>) -> DenseMatrix<T> {
    for v in m.as_mut_slice() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    m
}

fn argmax_rows<T: Scalar>(m: &DenseMatrix<T>) -> Vec<u8> {
    m.row_iter()
        .map(|row| {
            let mut best = 0;
            for (i, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = i;
                }
            }
            best as u8
        })
        .collect()
}
