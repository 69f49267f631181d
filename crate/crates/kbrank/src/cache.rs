//! Pivot models trained on first use and kept in memory and on disk.
//!
//! Disk layout: `<cache>/pivot/<fingerprint>/<mode>/<first>__<second>.json`,
//! where the fingerprint covers the store, the corpus, the pivot settings and
//! the regression hyperparameters, so changing any of them starts a fresh
//! directory instead of reusing stale models.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use kbrank_core::pivot::{
    pivot_accuracy, train_key, ArticleFeatures, LogisticModel, LogisticParams, PivotConfig, PivotError, PivotKey, PivotModels,
};
use kbrank_core::text::Vocabulary;

use crate::formats::Fingerprint;
use crate::models::{load_json, save_json, LogisticFile};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub memory_hits: usize,
    pub disk_hits: usize,
    pub trained: usize,
    pub failed: usize,
}

#[derive(Debug, Clone)]
pub struct Warmed {
    pub model: Arc<LogisticModel>,
    pub holdout_accuracy: Option<f64>,
    pub from_disk: bool,
}

pub struct DiskPivotCache<'w> {
    features: ArticleFeatures<'w>,
    vocab: &'w Vocabulary,
    config: PivotConfig,
    params: LogisticParams,
    dir: Option<PathBuf>,
    memo: Mutex<BTreeMap<PivotKey, Result<Warmed, PivotError>>>,
    stats: Mutex<CacheStats>,
}

pub fn pivot_fingerprint(store_fp: &str, corpus_fp: &str, config: &PivotConfig, params: &LogisticParams) -> String {
    Fingerprint::new()
        .part("store", store_fp.as_bytes())
        .part("corpus", corpus_fp.as_bytes())
        .part("pivot", toml::to_string(config).expect("serializes").as_bytes())
        .part("regression", toml::to_string(params).expect("serializes").as_bytes())
        .finish()
}

impl<'w> DiskPivotCache<'w> {
    /// `dir` is the fingerprinted directory; `None` keeps models in memory only.
    pub fn new(
        features: ArticleFeatures<'w>,
        vocab: &'w Vocabulary,
        config: PivotConfig,
        params: LogisticParams,
        dir: Option<PathBuf>,
    ) -> Self {
        Self { features, vocab, config, params, dir, memo: Mutex::new(BTreeMap::new()), stats: Mutex::new(CacheStats::default()) }
    }

    pub fn stats(&self) -> CacheStats {
        *self.stats.lock().expect("stats lock")
    }

    pub fn path(&self, key: &PivotKey) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(key.mode.as_str()).join(format!("{}__{}.json", key.first, key.second)))
    }

    fn load(&self, path: &Path, key: &PivotKey) -> Option<Warmed> {
        if !path.is_file() {
            return None;
        }
        let file: LogisticFile = match load_json(path) {
            Ok(f) => f,
            Err(e) => {
                log::warn!("ignoring unreadable cached model: {e}");
                return None;
            }
        };
        if &file.key() != key {
            log::warn!("ignoring cached model {} stored for another pair", path.display());
            return None;
        }
        let accuracy = file.holdout_accuracy;
        match file.into_model(path, self.vocab) {
            Ok(m) => Some(Warmed { model: Arc::new(m), holdout_accuracy: accuracy, from_disk: true }),
            Err(e) => {
                log::warn!("ignoring cached model: {e}");
                None
            }
        }
    }

    fn train(&self, key: &PivotKey) -> Result<Warmed, PivotError> {
        let (dataset, trained) = train_key(key, &self.features, &self.config, &self.params)?;
        if !trained.model.meta.converged {
            log::warn!("pivot model {key} stopped after {} epochs without converging", trained.model.meta.epochs);
        }
        let accuracy = pivot_accuracy(&trained.model, &dataset, &self.features).ok();
        if let Some(path) = self.path(key) {
            let file = LogisticFile::new(key, &trained.model, self.vocab, accuracy);
            if let Err(e) = save_json(&path, &file) {
                log::warn!("could not cache pivot model: {e}");
            }
        }
        Ok(Warmed { model: Arc::new(trained.model), holdout_accuracy: accuracy, from_disk: false })
    }

    /// The model for a canonical key, with its holdout accuracy.
    pub fn warm(&self, key: &PivotKey) -> Result<Warmed, PivotError> {
        if let Some(hit) = self.memo.lock().expect("memo lock").get(key) {
            self.stats.lock().expect("stats lock").memory_hits += 1;
            return hit.clone();
        }
        let result = match self.path(key).and_then(|p| self.load(&p, key)) {
            Some(w) => {
                self.stats.lock().expect("stats lock").disk_hits += 1;
                Ok(w)
            }
            None => {
                let r = self.train(key);
                let mut stats = self.stats.lock().expect("stats lock");
                match r {
                    Ok(_) => stats.trained += 1,
                    Err(_) => stats.failed += 1,
                }
                r
            }
        };
        self.memo.lock().expect("memo lock").entry(key.clone()).or_insert(result).clone()
    }
}

impl PivotModels for DiskPivotCache<'_> {
    fn model(&self, key: &PivotKey) -> Result<Arc<LogisticModel>, PivotError> {
        self.warm(key).map(|w| w.model)
    }
}
