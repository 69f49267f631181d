//! JSON model files. Every file carries a format version, the model kind and
//! the vocabulary it was trained on; term-indexed values are stored against
//! term strings so a file can be checked against the corpus it is used with.

use std::collections::BTreeMap;
use std::path::Path;

use kbrank_core::pivot::{LogisticModel, PivotKey, TrainingMeta};
use kbrank_core::semantic::linalg::Matrix;
use kbrank_core::semantic::{LdaConfig, LdaModel, LsiModel, SvdOptions, TopicModel};
use kbrank_core::text::{FeatureMode, TfIdfModel, Vocabulary};
use kbrank_core::PropertyId;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formats::{sha256_hex, write_atomic, FormatError};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    File(#[from] FormatError),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: &Path, message: impl Into<String>) -> ModelError {
    ModelError::Invalid { path: path.display().to_string(), message: message.into() }
}

/// Identifies a vocabulary by its ordered term list.
pub fn vocabulary_fingerprint(vocab: &Vocabulary) -> String {
    sha256_hex(vocab.terms().join("\n").as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabularyManifest {
    pub fingerprint: String,
    pub terms: Vec<String>,
}

impl VocabularyManifest {
    pub fn of(vocab: &Vocabulary) -> Self {
        Self { fingerprint: vocabulary_fingerprint(vocab), terms: vocab.terms().to_vec() }
    }
}

fn check_vocabulary(path: &Path, manifest: &VocabularyManifest, vocab: &Vocabulary) -> Result<(), ModelError> {
    if manifest.fingerprint != vocabulary_fingerprint(vocab) || manifest.terms.len() != vocab.len() {
        return Err(invalid(path, "model vocabulary does not match the corpus; retrain the model"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFile {
    pub version: u32,
    pub kind: String,
    pub first: PropertyId,
    pub second: PropertyId,
    pub mode: FeatureMode,
    pub vocabulary_fingerprint: String,
    pub bias: f64,
    /// Non-zero weights keyed by term.
    pub weights: BTreeMap<String, f64>,
    pub meta: TrainingMeta,
    /// Share of the holdout classified correctly, if there was a holdout.
    pub holdout_accuracy: Option<f64>,
}

impl LogisticFile {
    pub fn new(key: &PivotKey, model: &LogisticModel, vocab: &Vocabulary, holdout_accuracy: Option<f64>) -> Self {
        let weights = model
            .weights
            .iter()
            .map(|(&id, &w)| (vocab.term(id).expect("weight for a vocabulary term").to_string(), w))
            .collect();
        Self {
            version: MODEL_FORMAT_VERSION,
            kind: "logistic".into(),
            first: key.first.clone(),
            second: key.second.clone(),
            mode: key.mode,
            vocabulary_fingerprint: vocabulary_fingerprint(vocab),
            bias: model.bias,
            weights,
            meta: model.meta.clone(),
            holdout_accuracy,
        }
    }

    pub fn key(&self) -> PivotKey {
        PivotKey { first: self.first.clone(), second: self.second.clone(), mode: self.mode }
    }

    pub fn into_model(self, path: &Path, vocab: &Vocabulary) -> Result<LogisticModel, ModelError> {
        check_header(path, self.version, &self.kind, "logistic")?;
        if self.vocabulary_fingerprint != vocabulary_fingerprint(vocab) {
            return Err(invalid(path, "model vocabulary does not match the corpus; retrain the model"));
        }
        let mut weights = BTreeMap::new();
        for (term, w) in self.weights {
            let id = vocab.id(&term).ok_or_else(|| invalid(path, format!("unknown term {term:?}")))?;
            weights.insert(id, w);
        }
        Ok(LogisticModel { weights, bias: self.bias, mode: self.mode, meta: self.meta })
    }
}

fn check_header(path: &Path, version: u32, kind: &str, expected: &str) -> Result<(), ModelError> {
    if version != MODEL_FORMAT_VERSION {
        return Err(invalid(path, format!("unsupported model format version {version}")));
    }
    if kind != expected {
        return Err(invalid(path, format!("expected a {expected} model, found {kind}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfSection {
    pub prune_low: f64,
    pub prune_high: f64,
    /// Retained terms and their weights.
    pub idf: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TopicFile {
    Lsi {
        version: u32,
        vocabulary: VocabularyManifest,
        options: SvdOptions,
        sigma: Vec<f64>,
        /// One vocabulary-length column per topic.
        u: Vec<Vec<f64>>,
        tfidf: TfIdfSection,
    },
    Lda {
        version: u32,
        vocabulary: VocabularyManifest,
        config: LdaConfig,
        /// One vocabulary-length distribution per topic.
        phi: Vec<Vec<f64>>,
    },
}

impl TopicFile {
    pub fn from_model(model: &TopicModel, vocab: &Vocabulary, options: &SvdOptions) -> Self {
        match model {
            TopicModel::Lsi { model, tfidf } => {
                let (low, high) = tfidf.prune_fractions();
                TopicFile::Lsi {
                    version: MODEL_FORMAT_VERSION,
                    vocabulary: VocabularyManifest::of(vocab),
                    options: *options,
                    sigma: model.sigma.clone(),
                    u: (0..model.k()).map(|t| model.u.col(t).to_vec()).collect(),
                    tfidf: TfIdfSection {
                        prune_low: low,
                        prune_high: high,
                        idf: tfidf.retained().map(|(id, w)| (vocab.terms()[id].clone(), w)).collect(),
                    },
                }
            }
            TopicModel::Lda(m) => TopicFile::Lda {
                version: MODEL_FORMAT_VERSION,
                vocabulary: VocabularyManifest::of(vocab),
                config: m.config,
                phi: (0..m.k()).map(|t| m.phi(t).to_vec()).collect(),
            },
        }
    }

    pub fn into_model(self, path: &Path, vocab: &Vocabulary) -> Result<TopicModel, ModelError> {
        match self {
            TopicFile::Lsi { version, vocabulary, sigma, u, tfidf, .. } => {
                check_header(path, version, "lsi", "lsi")?;
                check_vocabulary(path, &vocabulary, vocab)?;
                if u.len() != sigma.len() || u.iter().any(|c| c.len() != vocab.len()) {
                    return Err(invalid(path, "matrix shape does not match vocabulary and topic count"));
                }
                let data: Vec<f64> = u.into_iter().flatten().collect();
                let u = Matrix::from_col_major(vocab.len(), sigma.len(), data);
                let mut idf = BTreeMap::new();
                for (term, w) in tfidf.idf {
                    let id = vocab.id(&term).ok_or_else(|| invalid(path, format!("unknown term {term:?}")))?;
                    idf.insert(id, w);
                }
                Ok(TopicModel::Lsi {
                    model: LsiModel { u, sigma },
                    tfidf: TfIdfModel::from_parts(idf, tfidf.prune_low, tfidf.prune_high),
                })
            }
            TopicFile::Lda { version, vocabulary, config, phi } => {
                check_header(path, version, "lda", "lda")?;
                check_vocabulary(path, &vocabulary, vocab)?;
                if phi.len() != config.k || phi.iter().any(|row| row.len() != vocab.len()) {
                    return Err(invalid(path, "matrix shape does not match vocabulary and topic count"));
                }
                let flat = phi.into_iter().flatten().collect();
                LdaModel::from_parts(config, vocab.len(), flat).map(TopicModel::Lda).map_err(|e| invalid(path, e.to_string()))
            }
        }
    }
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let bytes = serde_json::to_vec(value).expect("model values serialize");
    write_atomic(path, &bytes).map_err(|e| FormatError::io(path, e))
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ModelError> {
    let bytes = std::fs::read(path).map_err(|e| FormatError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| invalid(path, e.to_string()))
}

pub fn save_topic_model(path: &Path, model: &TopicModel, vocab: &Vocabulary, options: &SvdOptions) -> Result<(), FormatError> {
    save_json(path, &TopicFile::from_model(model, vocab, options))
}

pub fn load_topic_model(path: &Path, vocab: &Vocabulary) -> Result<TopicModel, ModelError> {
    load_json::<TopicFile>(path)?.into_model(path, vocab)
}

#[cfg(test)]
mod tests {
    use super::*;
    use kbrank_core::pivot::LogisticParams;
    use kbrank_core::semantic::{train_lda, train_lsi};
    use kbrank_core::text::{Corpus, DocumentId, Preprocessor};

    fn corpus() -> Corpus {
        let docs = [
            ("a", "goals scored match striker club goals"),
            ("b", "army battle war officer rank regiment"),
            ("c", "goals club league season match striker"),
            ("d", "war regiment rank army officer navy"),
        ];
        Corpus::from_texts(docs.iter().map(|(id, t)| (DocumentId::from(*id), *t)), &Preprocessor::default()).unwrap()
    }

    #[test]
    fn topic_models_round_trip_exactly() {
        let c = corpus();
        let dir = tempfile::tempdir().unwrap();
        let tfidf = TfIdfModel::fit(c.vocabulary(), 0.0, 0.0).unwrap();
        let fit = train_lsi(&c, &tfidf, 2, &SvdOptions::default()).unwrap();
        let lsi = TopicModel::Lsi { model: fit.model, tfidf };
        let path = dir.path().join("lsi.json");
        save_topic_model(&path, &lsi, c.vocabulary(), &SvdOptions::default()).unwrap();
        assert_eq!(load_topic_model(&path, c.vocabulary()).unwrap(), lsi);

        let bags: Vec<_> = c.documents().map(|(_, b)| b.clone()).collect();
        let cfg = LdaConfig { k: 2, iterations: 20, ..Default::default() };
        let lda = TopicModel::Lda(train_lda(&bags, c.vocabulary().len(), &cfg).unwrap());
        let path = dir.path().join("lda.json");
        save_topic_model(&path, &lda, c.vocabulary(), &SvdOptions::default()).unwrap();
        assert_eq!(load_topic_model(&path, c.vocabulary()).unwrap(), lda);
    }

    #[test]
    fn vocabulary_mismatch_is_rejected() {
        let c = corpus();
        let other = Corpus::from_texts([(DocumentId::from("x"), "completely different words")], &Preprocessor::default()).unwrap();
        let bags: Vec<_> = c.documents().map(|(_, b)| b.clone()).collect();
        let lda = TopicModel::Lda(train_lda(&bags, c.vocabulary().len(), &LdaConfig { k: 1, iterations: 1, ..Default::default() }).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lda.json");
        save_topic_model(&path, &lda, c.vocabulary(), &SvdOptions::default()).unwrap();
        let err = load_topic_model(&path, other.vocabulary()).unwrap_err();
        assert!(err.to_string().contains("retrain"));
    }

    #[test]
    fn logistic_round_trip() {
        let c = corpus();
        let vocab = c.vocabulary();
        let mut weights = BTreeMap::new();
        weights.insert(vocab.id("goal").unwrap(), 0.1 + 0.2);
        let meta = TrainingMeta { epochs: 3, params: LogisticParams::default(), final_loss: 0.25, converged: true };
        let model = LogisticModel { weights, bias: -1.0 / 3.0, mode: FeatureMode::TfIdf, meta };
        let (key, _) = PivotKey::canonical(&PropertyId::new("P2").unwrap(), &PropertyId::new("P1").unwrap(), FeatureMode::TfIdf);
        let file = LogisticFile::new(&key, &model, vocab, Some(1.0));
        let text = serde_json::to_string(&file).unwrap();
        let back: LogisticFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.key(), key);
        assert_eq!(back.into_model(Path::new("m.json"), vocab).unwrap(), model);
    }
}
