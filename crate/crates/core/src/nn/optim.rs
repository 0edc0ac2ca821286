use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, Mlp};
use super::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum OptimizerConfig {
    Sgd { lr: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, epsilon: f64 },
}

impl OptimizerConfig {
    pub const fn sgd() -> Self {
        Self::Sgd { lr: 1e-4 }
    }

    pub const fn adam() -> Self {
        Self::Adam {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sgd { .. } => "sgd",
            Self::Adam { .. } => "adam",
        }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            Self::Sgd { lr } | Self::Adam { lr, .. } => lr,
        }
    }

    pub fn with_lr(self, lr: f64) -> Self {
        match self {
            Self::Sgd { .. } => Self::Sgd { lr },
            Self::Adam {
                beta1, beta2, epsilon, ..
            } => Self::Adam {
                lr,
                beta1,
                beta2,
                epsilon,
            },
        }
    }
}

/// `p <- p - lr * g`.
pub fn sgd_step<T: Real>(params: &mut [T], grads: &[T], lr: T) {
    for (p, &g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
}

/// First and second moment estimates for one parameter slice.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamMoments<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Real> AdamMoments<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            m: vec![T::ZERO; n],
            v: vec![T::ZERO; n],
        }
    }
}

/// One bias-corrected Adam update at step `t` (1-based). The correction is
/// folded into the step size and `epsilon` is added to `sqrt(v)` of the raw
/// second moment.
pub fn adam_step<T: Real>(
    params: &mut [T],
    grads: &[T],
    state: &mut AdamMoments<T>,
    t: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
) {
    let step = T::from_f64(lr * (1.0 - beta2.powi(t as i32)).sqrt() / (1.0 - beta1.powi(t as i32)));
    let one_minus_b1 = T::from_f64(1.0 - beta1);
    let one_minus_b2 = T::from_f64(1.0 - beta2);
    let eps = T::from_f64(epsilon);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m += (g - *m) * one_minus_b1;
        *v += (g * g - *v) * one_minus_b2;
        *p -= step * *m / (v.sqrt() + eps);
    }
}

/// Optimizer state for a whole model.
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    config: OptimizerConfig,
    step: u64,
    moments: Vec<AdamMoments<T>>,
}

impl<T: Real> Optimizer<T> {
    pub fn new(config: OptimizerConfig, model: &Mlp<T>) -> Self {
        let moments = match config {
            OptimizerConfig::Sgd { .. } => Vec::new(),
            OptimizerConfig::Adam { .. } => model
                .layers
                .iter()
                .flat_map(|l| [AdamMoments::zeros(l.weights.len()), AdamMoments::zeros(l.bias.len())])
                .collect(),
        };
        Self {
            config,
            step: 0,
            moments,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn apply(&mut self, model: &mut Mlp<T>, grads: &Gradients<T>) {
        self.step += 1;
        for (li, layer) in model.layers.iter_mut().enumerate() {
            let slices = [
                (&mut layer.weights, &grads.weights[li]),
                (&mut layer.bias, &grads.bias[li]),
            ];
            for (which, (p, g)) in slices.into_iter().enumerate() {
                match self.config {
                    OptimizerConfig::Sgd { lr } => sgd_step(p, g, T::from_f64(lr)),
                    OptimizerConfig::Adam {
                        lr,
                        beta1,
                        beta2,
                        epsilon,
                    } => adam_step(p, g, &mut self.moments[2 * li + which], self.step, lr, beta1, beta2, epsilon),
                }
            }
        }
    }
}
