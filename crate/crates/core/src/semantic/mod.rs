//! Topic models over the article corpus and the cosine-similarity judge
//! built on them.

pub mod lda;
pub mod linalg;
pub mod lsi;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::judge::{JudgeError, PreferenceJudge, PreferenceJudgment};
use crate::store::{EntityId, KnowledgeStore, PropertyDef, PropertyId, StoreError};
use crate::text::{vectorize, BagOfWords, Corpus, Preprocessor, TfIdfModel, Vocabulary};

pub use lda::{train_lda, LdaConfig, LdaModel};
pub use lsi::{train_lsi, truncated_svd, LsiFit, LsiModel, SvdOptions, TruncatedSvd};

pub const DEFAULT_LSI_TOPICS: usize = 50;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SemanticError {
    #[error("rank {k} exceeds achievable rank {max}")]
    RankTooLarge { k: usize, max: usize },
    #[error("term-document matrix has rank below {k}")]
    RankDeficient { k: usize },
    #[error("need {needed} non-empty documents, have {available}")]
    TooFewDocuments { needed: usize, available: usize },
    #[error("topic count must be at least 1")]
    InvalidTopicCount,
    #[error("{name} must be positive, got {value}")]
    InvalidPrior { name: &'static str, value: f64 },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("no inferable content")]
    NoInferableContent,
    #[error("property {0} has no text after preprocessing")]
    EmptyPropertyText(PropertyId),
    #[error("zero vector")]
    ZeroVector,
    #[error("topic vectors come from different model kinds")]
    KindMismatch,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("entity {0} has no article in the corpus")]
    NoArticle(EntityId),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "lowercase"))]
pub enum TopicKind {
    Lsi,
    Lda,
}

impl TopicKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TopicKind::Lsi => "lsi",
            TopicKind::Lda => "lda",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TopicVector {
    pub kind: TopicKind,
    pub values: Vec<f64>,
}

pub fn cosine(u: &TopicVector, v: &TopicVector) -> Result<f64, SemanticError> {
    if u.kind != v.kind {
        return Err(SemanticError::KindMismatch);
    }
    if u.values.len() != v.values.len() {
        return Err(SemanticError::LengthMismatch { left: u.values.len(), right: v.values.len() });
    }
    let nu = libm::sqrt(u.values.iter().map(|x| x * x).sum());
    let nv = libm::sqrt(v.values.iter().map(|x| x * x).sum());
    if nu == 0.0 || nv == 0.0 {
        return Err(SemanticError::ZeroVector);
    }
    let d: f64 = u.values.iter().zip(&v.values).map(|(a, b)| (a / nu) * (b / nv)).sum();
    Ok(d.clamp(-1.0, 1.0))
}

/// Bag of the property's label followed by its description.
pub fn property_text(def: &PropertyDef, pre: &Preprocessor, vocab: &Vocabulary) -> Result<BagOfWords, SemanticError> {
    let text = format!("{} {}", def.label, def.description);
    let tokens = pre.tokens(&text);
    if tokens.is_empty() {
        return Err(SemanticError::EmptyPropertyText(def.id.clone()));
    }
    Ok(vocab.bag(&tokens))
}

/// A trained model ready for inference.
#[derive(Debug, Clone, PartialEq)]
pub enum TopicModel {
    /// LSI folds in TF-IDF vectors, so it carries the weighting it was trained with.
    Lsi { model: LsiModel, tfidf: TfIdfModel },
    Lda(LdaModel),
}

impl TopicModel {
    pub fn kind(&self) -> TopicKind {
        match self {
            TopicModel::Lsi { .. } => TopicKind::Lsi,
            TopicModel::Lda(_) => TopicKind::Lda,
        }
    }

    pub fn k(&self) -> usize {
        match self {
            TopicModel::Lsi { model, .. } => model.k(),
            TopicModel::Lda(m) => m.k(),
        }
    }

    pub fn infer(&self, bag: &BagOfWords) -> Result<TopicVector, SemanticError> {
        match self {
            TopicModel::Lsi { model, tfidf } => model.fold_in(&vectorize(Some(tfidf), bag)),
            TopicModel::Lda(m) => m.infer(bag),
        }
    }
}

/// Prefers the property whose text is closer, by cosine, to the entity's
/// article in topic space.
pub struct SemanticJudge<'a> {
    store: &'a KnowledgeStore,
    corpus: &'a Corpus,
    model: &'a TopicModel,
    properties: BTreeMap<PropertyId, Result<TopicVector, SemanticError>>,
    entities: BTreeMap<EntityId, TopicVector>,
}

impl<'a> SemanticJudge<'a> {
    /// Infers every property's vector up front.
    pub fn new(store: &'a KnowledgeStore, corpus: &'a Corpus, pre: &Preprocessor, model: &'a TopicModel) -> Self {
        let properties = store
            .properties()
            .map(|def| {
                let v = property_text(def, pre, corpus.vocabulary()).and_then(|bag| model.infer(&bag));
                (def.id.clone(), v)
            })
            .collect();
        Self { store, corpus, model, properties, entities: BTreeMap::new() }
    }

    /// Supplies precomputed entity vectors, e.g. training representations.
    pub fn with_entity_vectors(mut self, vectors: BTreeMap<EntityId, TopicVector>) -> Self {
        self.entities = vectors;
        self
    }

    pub fn property_vector(&self, p: &PropertyId) -> Result<TopicVector, SemanticError> {
        self.store.property(p)?;
        match self.properties.get(p) {
            Some(v) => v.clone(),
            None => Err(StoreError::UnknownProperty(p.clone()).into()),
        }
    }

    pub fn entity_vector(&self, e: &EntityId) -> Result<TopicVector, SemanticError> {
        let record = self.store.entity(e)?;
        if let Some(v) = self.entities.get(e) {
            return Ok(v.clone());
        }
        let bag = record
            .article_ref
            .as_ref()
            .and_then(|d| self.corpus.bag(d))
            .ok_or_else(|| SemanticError::NoArticle(e.clone()))?;
        self.model.infer(bag)
    }

    /// Cosines of `p` and `q` to the entity.
    pub fn similarities(&self, e: &EntityId, p: &PropertyId, q: &PropertyId) -> Result<(f64, f64), SemanticError> {
        let ev = self.entity_vector(e)?;
        let sp = cosine(&ev, &self.property_vector(p)?)?;
        let sq = cosine(&ev, &self.property_vector(q)?)?;
        Ok((sp, sq))
    }
}

impl PreferenceJudge for SemanticJudge<'_> {
    fn name(&self) -> &str {
        self.model.kind().as_str()
    }

    fn judge(&self, e: &EntityId, p: &PropertyId, q: &PropertyId) -> Result<PreferenceJudgment, JudgeError> {
        match self.similarities(e, p, q) {
            Ok((sp, sq)) => Ok(PreferenceJudgment::from_scores(sp, sq)),
            Err(SemanticError::Store(err)) => Err(err.into()),
            Err(err) => Err(JudgeError::Abstain(abstain_reason(&err))),
        }
    }
}

fn abstain_reason(err: &SemanticError) -> String {
    format!("{err}")
}
