//! Loads the store, corpus and TF-IDF model a run works on.

use std::path::PathBuf;

use kbrank_core::store::{SkippedRecord, StoreError};
use kbrank_core::text::{Corpus, Preprocessor, StopList, TextError, TfIdfModel, STOPWORDS_VERSION};
use kbrank_core::{KnowledgeStore, PropertyId};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::formats::{self, Fingerprint, FormatError};

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("ingesting {}: {source}", path.display())]
    Store { path: PathBuf, source: StoreError },
    #[error("building corpus from {}: {source}", path.display())]
    Corpus { path: PathBuf, source: TextError },
}

pub struct Workspace {
    pub config: RunConfig,
    pub store: KnowledgeStore,
    pub skipped: Vec<SkippedRecord>,
    pub corpus: Corpus,
    pub preprocessor: Preprocessor,
    /// `None` when the vocabulary is too small to prune; the reason is kept.
    pub tfidf: Result<TfIdfModel, TextError>,
    pub store_fingerprint: String,
    pub corpus_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UsageRow {
    pub property: PropertyId,
    pub label: String,
    pub usage: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestStats {
    pub entities: usize,
    pub properties: usize,
    pub skipped: usize,
    pub documents: usize,
    pub vocabulary: usize,
    pub tfidf_retained: Option<usize>,
    pub store_fingerprint: String,
    pub corpus_fingerprint: String,
    /// Most used first, ties by id.
    pub usage: Vec<UsageRow>,
}

impl Workspace {
    pub fn load(config: RunConfig) -> Result<Self, WorkspaceError> {
        let entities_path = config.input("entities", &config.paths.entities)?;
        let properties_path = config.input("properties", &config.paths.properties)?;
        let corpus_path = config.input("corpus", &config.paths.corpus)?;
        let stop_path = match &config.paths.stopwords {
            Some(_) => Some(config.input("stopwords", &config.paths.stopwords)?),
            None => None,
        };

        let entities = formats::read_entities(&entities_path)?;
        let properties = formats::read_properties(&properties_path)?;
        let ingested = KnowledgeStore::ingest(entities, properties, &config.ingest)
            .map_err(|source| WorkspaceError::Store { path: entities_path.clone(), source })?;
        for s in &ingested.skipped {
            log::warn!("{}: skipped record {} ({}): {}", entities_path.display(), s.index + 1, s.id, s.reason);
        }

        let stop = match &stop_path {
            Some(p) => formats::read_stoplist(p)?,
            None => StopList::bundled(),
        };
        let preprocessor = Preprocessor::new(stop);
        let articles = formats::read_articles(&corpus_path)?;
        let corpus = Corpus::from_texts(articles.iter().map(|a| (a.id.clone(), a.text.as_str())), &preprocessor)
            .map_err(|source| WorkspaceError::Corpus { path: corpus_path.clone(), source })?;
        let tfidf = TfIdfModel::fit(corpus.vocabulary(), config.tfidf.prune_low, config.tfidf.prune_high);
        if let Err(e) = &tfidf {
            log::warn!("no TF-IDF model: {e}");
        }

        let store_fingerprint = Fingerprint::new()
            .file("entities", &entities_path)?
            .file("properties", &properties_path)?
            .part("ingest", toml::to_string(&config.ingest).expect("filter serializes").as_bytes())
            .finish();
        let mut corpus_fp = Fingerprint::new().file("corpus", &corpus_path)?.part("stopwords", STOPWORDS_VERSION.as_bytes());
        if let Some(p) = &stop_path {
            corpus_fp = corpus_fp.file("stopword-file", p)?;
        }
        let corpus_fingerprint = corpus_fp.part("tfidf", toml::to_string(&config.tfidf).expect("tfidf serializes").as_bytes()).finish();

        Ok(Self {
            config,
            store: ingested.store,
            skipped: ingested.skipped,
            corpus,
            preprocessor,
            tfidf,
            store_fingerprint,
            corpus_fingerprint,
        })
    }

    pub fn tfidf(&self) -> Option<&TfIdfModel> {
        self.tfidf.as_ref().ok()
    }

    pub fn stats(&self) -> IngestStats {
        let mut usage: Vec<UsageRow> = self
            .store
            .properties()
            .map(|d| UsageRow { property: d.id.clone(), label: d.label.clone(), usage: self.store.usage(&d.id).unwrap_or(0) })
            .collect();
        usage.sort_by(|a, b| b.usage.cmp(&a.usage).then_with(|| a.property.cmp(&b.property)));
        IngestStats {
            entities: self.store.entity_count(),
            properties: self.store.property_count(),
            skipped: self.skipped.len(),
            documents: self.corpus.len(),
            vocabulary: self.corpus.vocabulary().len(),
            tfidf_retained: self.tfidf().map(|t| t.retained_len()),
            store_fingerprint: self.store_fingerprint.clone(),
            corpus_fingerprint: self.corpus_fingerprint.clone(),
            usage,
        }
    }
}
