//! Small dense networks trained with mini-batch SGD or Adam on cross-entropy.

mod mlp;
mod optim;
mod real;
mod sparse;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mlp::{argmax_rows, cross_entropy, softmax, Activations, Dense, Gradients, Mlp, Workspace};
pub use optim::{adam_step, sgd_step, AdamMoments, Optimizer, OptimizerConfig};
pub use real::Real;
pub use sparse::SparseRows;

use crate::initializers::{self, InitError, InitializerSpec, TensorShape};
use crate::mt19937::Mt19937;
use crate::samplers::{RandomSource, SamplerError, SourceTag};
use crate::sobol::{DirectionNumberTable, SobolCache};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("loss became non-finite in epoch {epoch}, batch {batch}")]
    NumericalDivergence {
        epoch: usize,
        batch: usize,
        /// Test accuracies of the epochs that completed.
        completed: Vec<f64>,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Init(#[from] InitError),
}

impl From<SamplerError> for NnError {
    fn from(e: SamplerError) -> Self {
        Self::Init(InitError::Sampler(e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub classes: usize,
    pub hidden_initializer: InitializerSpec,
    pub output_initializer: InitializerSpec,
    /// Draw the output layer pseudorandomly even when the hidden layers are quasirandom.
    pub pseudo_output: bool,
}

pub const MNIST_FEATURES: usize = 784;
pub const MNIST_CLASSES: usize = 10;

impl ModelConfig {
    /// One hidden layer of `units` (1 to 70) with a pseudorandom Glorot-uniform output layer.
    pub fn single_layer(units: usize, hidden_initializer: InitializerSpec) -> Result<Self, NnError> {
        if !(1..=70).contains(&units) {
            return Err(NnError::InvalidConfig(format!("hidden width must be in 1..=70, got {units}")));
        }
        Ok(Self {
            input_dim: MNIST_FEATURES,
            hidden: vec![units],
            classes: MNIST_CLASSES,
            hidden_initializer,
            output_initializer: InitializerSpec::GlorotUniform,
            pseudo_output: true,
        })
    }

    /// Two hidden layers of 32 units; every layer uses `initializer` from the same source.
    pub fn mlp_32_32(initializer: InitializerSpec) -> Self {
        Self {
            input_dim: MNIST_FEATURES,
            hidden: vec![32, 32],
            classes: MNIST_CLASSES,
            hidden_initializer: initializer,
            output_initializer: initializer,
            pseudo_output: false,
        }
    }

    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.input_dim];
        widths.extend(&self.hidden);
        widths.push(self.classes);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Number of layers whose weights come from the quasirandom source.
    pub fn quasi_layer_count(&self) -> usize {
        self.hidden.len() + usize::from(!self.pseudo_output)
    }
}

/// Where kernel values come from.
#[derive(Debug, Clone)]
pub enum WeightSource {
    /// Consecutive Sobol' dimensions starting at `start`, one per layer.
    Quasi {
        table: Arc<DirectionNumberTable>,
        start: usize,
        cache: Option<Arc<SobolCache>>,
    },
    /// MT19937 streams seeded `base + layer index`.
    Pseudo,
}

/// Builds a model from `cfg`. Pseudorandom layers (all layers for the
/// pseudorandom arm, the output layer when `pseudo_output` is set) use MT19937
/// seeds `pseudo_base + layer index`. Biases start at zero.
pub fn build_model(
    cfg: &ModelConfig,
    source: &WeightSource,
    pseudo_base: u32,
) -> Result<(Mlp<f32>, Vec<SourceTag>), NnError> {
    let shapes = cfg.layer_shapes();
    let last = shapes.len() - 1;
    let quasi_dims = match source {
        WeightSource::Quasi { start, .. } => initializers::assign_layer_seeds(*start, cfg.quasi_layer_count())?,
        WeightSource::Pseudo => Vec::new(),
    };
    let pseudo_seeds = initializers::pseudo_layer_seeds(pseudo_base, shapes.len());
    let mut layers = Vec::with_capacity(shapes.len());
    let mut tags = Vec::with_capacity(shapes.len());
    for (i, &(rows, cols)) in shapes.iter().enumerate() {
        let spec = if i == last {
            cfg.output_initializer
        } else {
            cfg.hidden_initializer
        };
        let mut src = match source {
            WeightSource::Quasi { table, cache, .. } if !(i == last && cfg.pseudo_output) => {
                let k = quasi_dims[i];
                match cache {
                    Some(c) if c.dimensions() >= k => RandomSource::quasi_cached(Arc::clone(table), k, Arc::clone(c))?,
                    _ => RandomSource::quasi(Arc::clone(table), k)?,
                }
            }
            _ => RandomSource::pseudo(pseudo_seeds[i]),
        };
        let shape = TensorShape::matrix(rows, cols)?;
        let w = initializers::initialize(&spec, &shape, &mut src)?;
        tags.push(w.source);
        let values = w.values.iter().map(|&v| v as f32).collect();
        layers.push(Dense::from_weights(rows, cols, values)?);
    }
    Ok((Mlp::new(layers)?, tags))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub shuffle_seed: u32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig::adam(),
            epochs: 30,
            batch_size: 64,
            shuffle_seed: 0,
        }
    }
}

/// Features plus integer class labels.
#[derive(Debug, Clone, Copy)]
pub struct Split<'a, T> {
    pub x: &'a SparseRows<T>,
    pub labels: &'a [u8],
}

impl<T: Real> Split<'_, T> {
    fn check(&self) -> Result<(), NnError> {
        if self.x.rows() != self.labels.len() {
            return Err(NnError::ShapeMismatch(format!(
                "{} feature rows but {} labels",
                self.x.rows(),
                self.labels.len()
            )));
        }
        Ok(())
    }
}

/// Fraction of rows whose arg-max prediction equals the label.
pub fn evaluate<T: Real>(model: &Mlp<T>, data: Split<'_, T>) -> Result<f64, NnError> {
    data.check()?;
    if data.labels.is_empty() {
        return Err(NnError::ShapeMismatch("cannot evaluate on an empty split".into()));
    }
    const CHUNK: usize = 1000;
    let mut correct = 0usize;
    let rows: Vec<usize> = (0..data.x.rows()).collect();
    for chunk in rows.chunks(CHUNK) {
        let pred = model.predict(data.x, chunk)?;
        correct += pred
            .iter()
            .zip(chunk)
            .filter(|(p, &r)| **p == data.labels[r])
            .count();
    }
    Ok(correct as f64 / data.labels.len() as f64)
}

/// Trains for `cfg.epochs` epochs, reshuffling the training rows before each
/// epoch from an MT19937 stream seeded with `cfg.shuffle_seed`, and returns
/// the test accuracy after every epoch.
pub fn train<T: Real>(
    model: &mut Mlp<T>,
    train: Split<'_, T>,
    test: Split<'_, T>,
    cfg: &TrainConfig,
) -> Result<Vec<f64>, NnError> {
    train_with(model, train, test, cfg, |_, _| {})
}

/// Like [`train`], calling `on_epoch(epoch, accuracy)` after each epoch (1-based).
pub fn train_with<T: Real>(
    model: &mut Mlp<T>,
    train: Split<'_, T>,
    test: Split<'_, T>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<Vec<f64>, NnError> {
    let mut trainer = Trainer::new(model, cfg, train.x.rows())?;
    for _ in 0..cfg.epochs {
        let acc = trainer.run_epoch(model, train, test)?;
        on_epoch(trainer.epochs_done(), acc);
    }
    Ok(trainer.into_accuracies())
}

/// Training state that survives between epochs, so a run can be paused and
/// continued with more epochs.
#[derive(Debug, Clone)]
pub struct Trainer<T> {
    batch_size: usize,
    rng: Mt19937,
    order: Vec<usize>,
    optimizer: Optimizer<T>,
    workspace: Workspace<T>,
    labels: Vec<u8>,
    accuracies: Vec<f64>,
}

impl<T: Real> Trainer<T> {
    pub fn new(model: &Mlp<T>, cfg: &TrainConfig, train_rows: usize) -> Result<Self, NnError> {
        if cfg.batch_size == 0 || cfg.epochs == 0 {
            return Err(NnError::InvalidConfig("epochs and batch size must be positive".into()));
        }
        Ok(Self {
            batch_size: cfg.batch_size,
            rng: Mt19937::new(cfg.shuffle_seed),
            order: (0..train_rows).collect(),
            optimizer: Optimizer::new(cfg.optimizer, model),
            workspace: Workspace::new(model),
            labels: Vec::with_capacity(cfg.batch_size),
            accuracies: Vec::new(),
        })
    }

    pub fn epochs_done(&self) -> usize {
        self.accuracies.len()
    }

    pub fn accuracies(&self) -> &[f64] {
        &self.accuracies
    }

    pub fn into_accuracies(self) -> Vec<f64> {
        self.accuracies
    }

    /// Shuffles, runs one pass of mini-batch updates, and returns the test accuracy.
    pub fn run_epoch(&mut self, model: &mut Mlp<T>, train: Split<'_, T>, test: Split<'_, T>) -> Result<f64, NnError> {
        train.check()?;
        test.check()?;
        if train.x.rows() != self.order.len() {
            return Err(NnError::ShapeMismatch(format!(
                "trainer was set up for {} rows, got {}",
                self.order.len(),
                train.x.rows()
            )));
        }
        let epoch = self.accuracies.len() + 1;
        self.rng.shuffle(&mut self.order);
        for (batch, rows) in self.order.chunks(self.batch_size).enumerate() {
            self.labels.clear();
            self.labels.extend(rows.iter().map(|&r| train.labels[r]));
            model.forward_into(train.x, rows, &mut self.workspace.activations)?;
            let loss = model.backward(train.x, rows, &self.labels, &mut self.workspace)?;
            if !loss.is_finite() {
                return Err(NnError::NumericalDivergence {
                    epoch,
                    batch,
                    completed: self.accuracies.clone(),
                });
            }
            self.optimizer.apply(model, &self.workspace.gradients);
        }
        let acc = evaluate(model, test)?;
        self.accuracies.push(acc);
        Ok(acc)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub dataset: String,
    pub model: String,
    pub optimizer: String,
    pub initializer: String,
    pub source: String,
}

/// Test accuracy per repetition (rows) and epoch (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTrace {
    pub values: Vec<Vec<f64>>,
    pub meta: TraceMeta,
}

impl AccuracyTrace {
    pub fn new(values: Vec<Vec<f64>>, meta: TraceMeta) -> Result<Self, NnError> {
        let epochs = values.first().map_or(0, Vec::len);
        if values.is_empty() || epochs == 0 {
            return Err(NnError::ShapeMismatch("a trace needs at least one repetition and epoch".into()));
        }
        if values.iter().any(|r| r.len() != epochs) {
            return Err(NnError::ShapeMismatch("repetitions have different epoch counts".into()));
        }
        if values.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(NnError::ShapeMismatch("accuracies must lie in [0, 1]".into()));
        }
        Ok(Self { values, meta })
    }

    pub fn repetitions(&self) -> usize {
        self.values.len()
    }

    pub fn epochs(&self) -> usize {
        self.values[0].len()
    }

    /// Accuracies of every repetition at `epoch` (1-based).
    pub fn column(&self, epoch: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[epoch - 1]).collect()
    }
}
