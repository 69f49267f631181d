//! Property pivoting: for two properties p and q, learn from article text
//! whether an entity has p but not q, or q but not p, then reuse that
//! classifier to decide which of the two is more interesting.

mod logistic;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use thiserror::Error;

pub use logistic::{sigmoid, train, Example, LogisticModel, LogisticParams, Objective, Trained, TrainingMeta};

use crate::judge::{JudgeError, PreferenceJudge, PreferenceJudgment};
use crate::store::{EntityId, KnowledgeStore, PropertyId, StoreError};
use crate::text::{vectorize, Corpus, FeatureMode, SparseVector, TfIdfModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PivotError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("insufficient pivot data for {p}/{q}: sides of {positives} and {negatives}, need {min} each")]
    InsufficientData { p: PropertyId, q: PropertyId, positives: usize, negatives: usize, min: usize },
    #[error("feature mode tfidf needs a fitted TF-IDF model")]
    MissingTfIdf,
    #[error("holdout set is empty")]
    EmptyHoldout,
    #[error("entity {0} has no article")]
    NoArticle(EntityId),
    #[error("no model for {0}")]
    NoModel(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct PivotConfig {
    /// Training entities per side.
    pub cap: usize,
    /// Holdout entities over both sides.
    pub holdout: usize,
    /// Minimum entities per side (training plus holdout).
    pub min_side: usize,
}

impl Default for PivotConfig {
    fn default() -> Self {
        Self { cap: 10_000, holdout: 200, min_side: 50 }
    }
}

/// Entities having `p` but not `q` (label 1) against entities having `q`
/// but not `p` (label 0), each side split into training and holdout parts.
#[derive(Debug, Clone, PartialEq)]
pub struct PivotDataset {
    pub p: PropertyId,
    pub q: PropertyId,
    pub mode: FeatureMode,
    pub train_positive: Vec<EntityId>,
    pub train_negative: Vec<EntityId>,
    pub holdout_positive: Vec<EntityId>,
    pub holdout_negative: Vec<EntityId>,
}

impl PivotDataset {
    pub fn positives(&self) -> impl Iterator<Item = &EntityId> {
        self.train_positive.iter().chain(&self.holdout_positive)
    }

    pub fn negatives(&self) -> impl Iterator<Item = &EntityId> {
        self.train_negative.iter().chain(&self.holdout_negative)
    }

    /// Holdout entities with `true` for the `p` side.
    pub fn holdout(&self) -> impl Iterator<Item = (&EntityId, bool)> {
        self.holdout_positive.iter().map(|e| (e, true)).chain(self.holdout_negative.iter().map(|e| (e, false)))
    }
}

/// Turns an entity's article into a feature vector.
#[derive(Debug, Clone, Copy)]
pub struct ArticleFeatures<'a> {
    pub store: &'a KnowledgeStore,
    pub corpus: &'a Corpus,
    pub tfidf: Option<&'a TfIdfModel>,
}

impl<'a> ArticleFeatures<'a> {
    pub fn new(store: &'a KnowledgeStore, corpus: &'a Corpus, tfidf: Option<&'a TfIdfModel>) -> Self {
        Self { store, corpus, tfidf }
    }

    fn has_article(&self, e: &EntityId) -> bool {
        self.store
            .entity(e)
            .ok()
            .and_then(|r| r.article_ref.as_ref())
            .and_then(|d| self.corpus.bag(d))
            .is_some_and(|b| !b.is_empty())
    }

    pub fn vector(&self, e: &EntityId, mode: FeatureMode) -> Result<SparseVector, PivotError> {
        let record = self.store.entity(e)?;
        let bag = record
            .article_ref
            .as_ref()
            .and_then(|d| self.corpus.bag(d))
            .ok_or_else(|| PivotError::NoArticle(e.clone()))?;
        match mode {
            FeatureMode::Counts => Ok(vectorize(None, bag)),
            FeatureMode::TfIdf => Ok(vectorize(Some(self.tfidf.ok_or(PivotError::MissingTfIdf)?), bag)),
        }
    }
}

/// Splits one side into training and holdout parts. The holdout comes after
/// the training cap in id order; sides too small for that give up at most a
/// fifth of their entities.
fn split_side(mut side: Vec<EntityId>, cap: usize, holdout: usize) -> (Vec<EntityId>, Vec<EntityId>) {
    let held = if side.len() >= cap + holdout { holdout } else { holdout.min(side.len() / 5) };
    let train_len = (side.len() - held).min(cap);
    let rest = side.split_off(train_len);
    side.truncate(train_len);
    (side, rest.into_iter().take(held).collect())
}

pub fn build_pivot_dataset(
    features: &ArticleFeatures<'_>,
    p: &PropertyId,
    q: &PropertyId,
    mode: FeatureMode,
    config: &PivotConfig,
) -> Result<PivotDataset, PivotError> {
    let (only_p, only_q) = features.store.split_by_pivot(p, q, usize::MAX)?;
    let per_side_holdout = [config.holdout - config.holdout / 2, config.holdout / 2];
    let limit = config.cap + per_side_holdout[0];
    let eligible = |side: Vec<EntityId>| -> Vec<EntityId> {
        side.into_iter().filter(|e| features.has_article(e)).take(limit).collect()
    };
    let (pos, neg) = (eligible(only_p), eligible(only_q));
    if pos.len() < config.min_side || neg.len() < config.min_side {
        return Err(PivotError::InsufficientData {
            p: p.clone(),
            q: q.clone(),
            positives: pos.len(),
            negatives: neg.len(),
            min: config.min_side,
        });
    }
    let (train_positive, holdout_positive) = split_side(pos, config.cap, per_side_holdout[0]);
    let (train_negative, holdout_negative) = split_side(neg, config.cap, per_side_holdout[1]);
    Ok(PivotDataset {
        p: p.clone(),
        q: q.clone(),
        mode,
        train_positive,
        train_negative,
        holdout_positive,
        holdout_negative,
    })
}

pub fn train_pivot(
    dataset: &PivotDataset,
    features: &ArticleFeatures<'_>,
    params: &LogisticParams,
) -> Result<Trained, PivotError> {
    let mut examples = Vec::new();
    for (side, label) in [(&dataset.train_positive, 1.0), (&dataset.train_negative, 0.0)] {
        for e in side {
            examples.push(Example { features: features.vector(e, dataset.mode)?, label });
        }
    }
    Ok(train(&examples, features.corpus.vocabulary().len(), dataset.mode, params))
}

/// Fraction of holdout entities assigned to their true side.
pub fn pivot_accuracy(
    model: &LogisticModel,
    dataset: &PivotDataset,
    features: &ArticleFeatures<'_>,
) -> Result<f64, PivotError> {
    let mut total = 0usize;
    let mut correct = 0usize;
    for (e, positive) in dataset.holdout() {
        let x = features.vector(e, dataset.mode)?;
        total += 1;
        if (model.predict(&x) > 0.5) == positive {
            correct += 1;
        }
    }
    if total == 0 {
        return Err(PivotError::EmptyHoldout);
    }
    Ok(correct as f64 / total as f64)
}

/// Identifies the model for an unordered property pair. Models are only
/// ever trained for `first < second`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PivotKey {
    pub first: PropertyId,
    pub second: PropertyId,
    pub mode: FeatureMode,
}

impl PivotKey {
    /// Canonical key for `(p, q)` and whether the caller's order is reversed.
    pub fn canonical(p: &PropertyId, q: &PropertyId, mode: FeatureMode) -> (Self, bool) {
        if p <= q {
            (Self { first: p.clone(), second: q.clone(), mode }, false)
        } else {
            (Self { first: q.clone(), second: p.clone(), mode }, true)
        }
    }
}

impl core::fmt::Display for PivotKey {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}/{}/{}", self.first, self.second, self.mode.as_str())
    }
}

/// Supplies trained pivot models, e.g. from memory or a disk cache.
pub trait PivotModels {
    fn model(&self, key: &PivotKey) -> Result<Arc<LogisticModel>, PivotError>;
}

impl<M: PivotModels + ?Sized> PivotModels for &M {
    fn model(&self, key: &PivotKey) -> Result<Arc<LogisticModel>, PivotError> {
        (**self).model(key)
    }
}

/// A fixed set of already trained models.
#[derive(Debug, Clone, Default)]
pub struct PretrainedModels {
    models: BTreeMap<PivotKey, Arc<LogisticModel>>,
}

impl PretrainedModels {
    pub fn insert(&mut self, key: PivotKey, model: LogisticModel) {
        self.models.insert(key, Arc::new(model));
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }
}

impl PivotModels for PretrainedModels {
    fn model(&self, key: &PivotKey) -> Result<Arc<LogisticModel>, PivotError> {
        self.models.get(key).cloned().ok_or_else(|| PivotError::NoModel(format!("{key}")))
    }
}

/// Builds the dataset for a canonical key and trains its model.
pub fn train_key(
    key: &PivotKey,
    features: &ArticleFeatures<'_>,
    config: &PivotConfig,
    params: &LogisticParams,
) -> Result<(PivotDataset, Trained), PivotError> {
    let dataset = build_pivot_dataset(features, &key.first, &key.second, key.mode, config)?;
    let trained = train_pivot(&dataset, features, params)?;
    Ok((dataset, trained))
}

/// Classifies the entity's article with the pivot model of the pair: the
/// property whose side the entity is assigned to wins.
pub struct PivotJudge<'a, M> {
    features: ArticleFeatures<'a>,
    models: M,
    mode: FeatureMode,
}

impl<'a, M: PivotModels> PivotJudge<'a, M> {
    pub fn new(features: ArticleFeatures<'a>, models: M, mode: FeatureMode) -> Self {
        Self { features, models, mode }
    }
}

impl<M: PivotModels> PreferenceJudge for PivotJudge<'_, M> {
    fn name(&self) -> &str {
        match self.mode {
            FeatureMode::Counts => "regression_counts",
            FeatureMode::TfIdf => "regression_tfidf",
        }
    }

    fn judge(&self, e: &EntityId, p: &PropertyId, q: &PropertyId) -> Result<PreferenceJudgment, JudgeError> {
        self.features.store.usage(p)?;
        self.features.store.usage(q)?;
        if p == q {
            return Ok(PreferenceJudgment::from_scores(0.5, 0.5));
        }
        let abstain = |err: PivotError| match err {
            PivotError::Store(s) => JudgeError::Store(s),
            other => JudgeError::Abstain(format!("{other}")),
        };
        let x = self.features.vector(e, self.mode).map_err(abstain)?;
        let (key, flipped) = PivotKey::canonical(p, q, self.mode);
        let model = self.models.model(&key).map_err(abstain)?;
        let prob = model.predict(&x);
        let canonical = PreferenceJudgment::from_scores(prob, 1.0 - prob);
        Ok(if flipped { canonical.swapped() } else { canonical })
    }
}
