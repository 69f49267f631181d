//! Latent Dirichlet allocation by collapsed Gibbs sampling.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{SemanticError, TopicKind, TopicVector};
use crate::text::BagOfWords;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct LdaConfig {
    pub k: usize,
    /// Symmetric document-topic prior.
    pub alpha: f64,
    /// Symmetric topic-word prior.
    pub beta: f64,
    pub seed: u64,
    /// Training sweeps over every token.
    pub iterations: usize,
    /// Sweeps per inferred document.
    pub inference_iterations: usize,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self { k: 20, alpha: 0.01, beta: 0.01, seed: 0, iterations: 1000, inference_iterations: 200 }
    }
}

impl LdaConfig {
    fn validate(&self) -> Result<(), SemanticError> {
        if self.k < 1 {
            return Err(SemanticError::InvalidTopicCount);
        }
        if !(self.alpha > 0.0) {
            return Err(SemanticError::InvalidPrior { name: "alpha", value: self.alpha });
        }
        if !(self.beta > 0.0) {
            return Err(SemanticError::InvalidPrior { name: "beta", value: self.beta });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    pub config: LdaConfig,
    pub vocab_size: usize,
    /// Topic-major, `k * vocab_size`.
    phi: Vec<f64>,
}

impl LdaModel {
    pub fn from_parts(config: LdaConfig, vocab_size: usize, phi: Vec<f64>) -> Result<Self, SemanticError> {
        config.validate()?;
        if phi.len() != config.k * vocab_size {
            return Err(SemanticError::LengthMismatch { left: phi.len(), right: config.k * vocab_size });
        }
        Ok(Self { config, vocab_size, phi })
    }

    pub fn k(&self) -> usize {
        self.config.k
    }

    pub fn phi(&self, topic: usize) -> &[f64] {
        &self.phi[topic * self.vocab_size..(topic + 1) * self.vocab_size]
    }

    pub fn phi_flat(&self) -> &[f64] {
        &self.phi
    }

    /// Gibbs sampling of the document's topic assignments with φ held fixed.
    /// The returned distribution is the smoothed document-topic estimate
    /// averaged over the second half of the sweeps.
    pub fn infer(&self, bag: &BagOfWords) -> Result<TopicVector, SemanticError> {
        let tokens: Vec<usize> = expand(bag).filter(|&w| w < self.vocab_size).collect();
        if tokens.is_empty() {
            return Err(SemanticError::NoInferableContent);
        }
        let k = self.k();
        let alpha = self.config.alpha;
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ 0x5eed_1da0);
        let mut z: Vec<usize> = tokens.iter().map(|_| rng.random_range(0..k)).collect();
        let mut n_dt = vec![0u32; k];
        for &t in &z {
            n_dt[t] += 1;
        }
        let sweeps = self.config.inference_iterations.max(1);
        let burn_in = sweeps / 2;
        let norm = tokens.len() as f64 + k as f64 * alpha;
        let mut theta = vec![0.0; k];
        let mut weights = vec![0.0; k];
        for sweep in 0..sweeps {
            for (i, &w) in tokens.iter().enumerate() {
                n_dt[z[i]] -= 1;
                for (t, p) in weights.iter_mut().enumerate() {
                    *p = (n_dt[t] as f64 + alpha) * self.phi[t * self.vocab_size + w];
                }
                z[i] = draw(&mut rng, &weights);
                n_dt[z[i]] += 1;
            }
            if sweep >= burn_in {
                for (acc, &n) in theta.iter_mut().zip(&n_dt) {
                    *acc += (n as f64 + alpha) / norm;
                }
            }
        }
        let total: f64 = theta.iter().sum();
        theta.iter_mut().for_each(|x| *x /= total);
        Ok(TopicVector { kind: TopicKind::Lda, values: theta })
    }
}

fn expand(bag: &BagOfWords) -> impl Iterator<Item = usize> + '_ {
    bag.iter().flat_map(|(w, c)| core::iter::repeat_n(w, c as usize))
}

fn draw(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Trains on the given documents, whose term ids must be below `vocab_size`.
pub fn train_lda<'a, I>(docs: I, vocab_size: usize, config: &LdaConfig) -> Result<LdaModel, SemanticError>
where
    I: IntoIterator<Item = &'a BagOfWords>,
{
    config.validate()?;
    let docs: Vec<Vec<usize>> = docs.into_iter().map(|b| expand(b).collect::<Vec<_>>()).filter(|d| !d.is_empty()).collect();
    if docs.is_empty() || vocab_size == 0 {
        return Err(SemanticError::EmptyCorpus);
    }
    let k = config.k;
    let (alpha, beta) = (config.alpha, config.beta);
    let v_beta = vocab_size as f64 * beta;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // word-major so one token's k counts are contiguous
    let mut n_wt = vec![0u32; vocab_size * k];
    let mut n_t = vec![0u32; k];
    let mut n_dt: Vec<Vec<u32>> = Vec::with_capacity(docs.len());
    let mut z: Vec<Vec<usize>> = Vec::with_capacity(docs.len());
    for doc in &docs {
        let mut counts = vec![0u32; k];
        let assign: Vec<usize> = doc
            .iter()
            .map(|&w| {
                assert!(w < vocab_size, "term id {w} outside vocabulary of {vocab_size}");
                let t = rng.random_range(0..k);
                counts[t] += 1;
                n_wt[w * k + t] += 1;
                n_t[t] += 1;
                t
            })
            .collect();
        n_dt.push(counts);
        z.push(assign);
    }

    let mut weights = vec![0.0; k];
    for _ in 0..config.iterations {
        for (d, doc) in docs.iter().enumerate() {
            for (i, &w) in doc.iter().enumerate() {
                let old = z[d][i];
                n_dt[d][old] -= 1;
                n_wt[w * k + old] -= 1;
                n_t[old] -= 1;
                let row = &n_wt[w * k..(w + 1) * k];
                for t in 0..k {
                    weights[t] = (n_dt[d][t] as f64 + alpha) * (row[t] as f64 + beta) / (n_t[t] as f64 + v_beta);
                }
                let new = draw(&mut rng, &weights);
                z[d][i] = new;
                n_dt[d][new] += 1;
                n_wt[w * k + new] += 1;
                n_t[new] += 1;
            }
        }
    }

    let mut phi = vec![0.0; k * vocab_size];
    for t in 0..k {
        let denom = n_t[t] as f64 + v_beta;
        for w in 0..vocab_size {
            phi[t * vocab_size + w] = (n_wt[w * k + t] as f64 + beta) / denom;
        }
    }
    Ok(LdaModel { config: *config, vocab_size, phi })
}
