//! L2-regularised binary logistic regression over sparse features, trained
//! by full-batch gradient descent.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::text::{FeatureMode, SparseVector};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct LogisticParams {
    pub learning_rate: f64,
    /// Strength of the `l2 / 2 * |w|^2` penalty. The bias is not penalised.
    pub l2: f64,
    pub max_epochs: usize,
    /// Stop once an epoch lowers the loss by less than this.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self { learning_rate: 0.1, l2: 1e-4, max_epochs: 500, tolerance: 1e-6, seed: 0 }
    }
}

/// One training example: features and a label in {0, 1}.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: SparseVector,
    pub label: f64,
}

/// Mean log-loss plus the L2 penalty, over dense parameters
/// `[w_0, ..., w_{dim-1}, bias]`.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    examples: &'a [Example],
    dim: usize,
    l2: f64,
}

impl<'a> Objective<'a> {
    pub fn new(examples: &'a [Example], dim: usize, l2: f64) -> Self {
        Self { examples, dim, l2 }
    }

    fn margin(&self, params: &[f64], x: &SparseVector) -> f64 {
        x.dot_dense(&params[..self.dim]) + params[self.dim]
    }

    pub fn loss(&self, params: &[f64]) -> f64 {
        let n = self.examples.len() as f64;
        let data: f64 = self
            .examples
            .iter()
            .map(|ex| {
                let z = self.margin(params, &ex.features);
                softplus(z) - ex.label * z
            })
            .sum();
        let penalty: f64 = params[..self.dim].iter().map(|w| w * w).sum();
        data / n + 0.5 * self.l2 * penalty
    }

    pub fn gradient(&self, params: &[f64]) -> Vec<f64> {
        let n = self.examples.len() as f64;
        let mut g = vec![0.0; self.dim + 1];
        for ex in self.examples {
            let r = sigmoid(self.margin(params, &ex.features)) - ex.label;
            for (i, x) in ex.features.iter() {
                g[i] += r * x;
            }
            g[self.dim] += r;
        }
        for (gi, wi) in g[..self.dim].iter_mut().zip(&params[..self.dim]) {
            *gi = *gi / n + self.l2 * wi;
        }
        g[self.dim] /= n;
        g
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(libm::exp(-z))
    } else {
        libm::log1p(libm::exp(z))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainingMeta {
    pub epochs: usize,
    pub params: LogisticParams,
    pub final_loss: f64,
    /// False when `max_epochs` ran out before the tolerance was reached.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    /// Non-zero weights keyed by term id.
    pub weights: BTreeMap<usize, f64>,
    pub bias: f64,
    pub mode: FeatureMode,
    pub meta: TrainingMeta,
}

impl LogisticModel {
    pub fn margin(&self, x: &SparseVector) -> f64 {
        x.iter().map(|(i, v)| self.weights.get(&i).copied().unwrap_or(0.0) * v).sum::<f64>() + self.bias
    }

    /// Probability of label 1.
    pub fn predict(&self, x: &SparseVector) -> f64 {
        sigmoid(self.margin(x))
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: LogisticModel,
    /// Objective value before training and after every epoch.
    pub loss_history: Vec<f64>,
}

/// Fits weights for `dim` features. Each epoch takes one gradient step; if
/// the step would raise the loss, the learning rate is halved (and stays
/// halved) until it does not, so the recorded loss never increases.
///
/// Weights of features that occur in the data start at small seeded values;
/// the rest start and stay at zero.
pub fn train(examples: &[Example], dim: usize, mode: FeatureMode, params: &LogisticParams) -> Trained {
    let objective = Objective::new(examples, dim, params.l2);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut present = vec![false; dim];
    for ex in examples {
        for (i, _) in ex.features.iter() {
            present[i] = true;
        }
    }
    let mut w = vec![0.0; dim + 1];
    for (wi, &p) in w.iter_mut().zip(&present) {
        if p {
            *wi = rng.random_range(-1e-3..1e-3);
        }
    }

    let mut lr = params.learning_rate;
    let mut loss = objective.loss(&w);
    let mut history = vec![loss];
    let mut converged = false;
    let mut epochs = 0;
    let mut candidate = vec![0.0; dim + 1];
    while epochs < params.max_epochs {
        epochs += 1;
        let g = objective.gradient(&w);
        let mut next_loss;
        let mut halvings = 0;
        loop {
            for ((c, wi), gi) in candidate.iter_mut().zip(&w).zip(&g) {
                *c = wi - lr * gi;
            }
            next_loss = objective.loss(&candidate);
            if next_loss <= loss || halvings >= 60 {
                break;
            }
            lr *= 0.5;
            halvings += 1;
        }
        if next_loss > loss {
            // No descent direction left at machine precision.
            history.push(loss);
            converged = true;
            break;
        }
        core::mem::swap(&mut w, &mut candidate);
        let delta = loss - next_loss;
        loss = next_loss;
        history.push(loss);
        if delta < params.tolerance {
            converged = true;
            break;
        }
    }

    let bias = w[dim];
    let weights = w[..dim].iter().enumerate().filter(|(_, &x)| x != 0.0).map(|(i, &x)| (i, x)).collect();
    Trained {
        model: LogisticModel {
            weights,
            bias,
            mode,
            meta: TrainingMeta { epochs, params: *params, final_loss: loss, converged },
        },
        loss_history: history,
    }
}
