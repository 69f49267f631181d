//! Builds judges by method name and runs them over gold records.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use kbrank_core::baselines::{FixtureProvider, HumanFrequency, OccupationFrequency, PropertySuggester, SearchCount};
use kbrank_core::ensemble::{Cell, EnsembleJudge};
use kbrank_core::gold::GoldRecord;
use kbrank_core::pivot::{ArticleFeatures, PivotJudge};
use kbrank_core::semantic::{train_lda, train_lsi, SemanticJudge, TopicKind, TopicModel};
use kbrank_core::text::FeatureMode;
use kbrank_core::{EntityId, JudgeError, PreferenceJudge, PreferenceJudgment, PropertyId, Winner};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cache::{pivot_fingerprint, DiskPivotCache};
use crate::formats::{read_ndjson, Fingerprint};
use crate::models::{load_topic_model, save_topic_model};
use crate::workspace::Workspace;

/// Every method name `judge` understands, besides `ensemble:<name>` and
/// `recorded:<method>`. `echo` only exists for evaluation.
pub const METHODS: [&str; 10] = [
    "human_frequency",
    "occupation_frequency",
    "search_count",
    "property_suggester",
    "regression_counts",
    "regression_tfidf",
    "lsi",
    "lda",
    "random",
    "echo",
];

#[derive(Debug, Error)]
pub enum MethodError {
    #[error("unknown method {0:?}")]
    Unknown(String),
    #[error("unknown ensemble {0:?}")]
    UnknownEnsemble(String),
    #[error("method {0} needs gold annotations and cannot judge arbitrary pairs")]
    NeedsGold(String),
    #[error("method {method} is unavailable: {reason}")]
    Unavailable { method: String, reason: String },
}

fn unavailable(method: &str, reason: impl ToString) -> MethodError {
    MethodError::Unavailable { method: method.to_string(), reason: reason.to_string() }
}

/// Picks a side by hashing the seed, the entity and the unordered pair.
pub struct RandomJudge {
    seed: u64,
}

impl RandomJudge {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }
}

impl PreferenceJudge for RandomJudge {
    fn name(&self) -> &str {
        "random"
    }

    fn judge(&self, e: &EntityId, p: &PropertyId, q: &PropertyId) -> Result<PreferenceJudgment, JudgeError> {
        if p == q {
            return Ok(PreferenceJudgment::from_scores(0.5, 0.5));
        }
        let (lo, hi, flipped) = if p < q { (p, q, false) } else { (q, p, true) };
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        for part in [e.as_str(), lo.as_str(), hi.as_str()] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        let lo_wins = h.finalize()[0] & 1 == 0;
        let j = if lo_wins { PreferenceJudgment::from_scores(1.0, 0.0) } else { PreferenceJudgment::from_scores(0.0, 1.0) };
        Ok(if flipped { j.swapped() } else { j })
    }
}

/// One stored method decision, keyed by labels or ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedOutput {
    pub method: String,
    pub entity: String,
    pub prop_a: String,
    pub prop_b: String,
    #[serde(default)]
    pub score_a: Option<f64>,
    #[serde(default)]
    pub score_b: Option<f64>,
    /// Required when scores are absent; must agree with them otherwise.
    #[serde(default)]
    pub winner: Option<Winner>,
    #[serde(default)]
    pub note: Option<String>,
}

impl RecordedOutput {
    pub fn judgment(&self) -> Result<PreferenceJudgment, String> {
        let j = match (self.score_a, self.score_b, self.winner) {
            (Some(a), Some(b), w) => {
                let j = PreferenceJudgment::from_scores(a, b);
                if w.is_some_and(|w| w != j.winner) {
                    return Err(format!("recorded winner {:?} contradicts scores {a} and {b}", w.unwrap()));
                }
                j
            }
            (None, None, Some(w)) => PreferenceJudgment { winner: w, score_first: f64::NAN, score_second: f64::NAN },
            _ => return Err("record needs both scores or a winner".into()),
        };
        Ok(j)
    }
}

pub fn read_recorded(path: &Path) -> Result<Vec<RecordedOutput>, String> {
    let rows: Vec<RecordedOutput> = read_ndjson(path).map_err(|e| e.to_string())?;
    for (i, r) in rows.iter().enumerate() {
        r.judgment().map_err(|e| format!("{}: record {}: {e}", path.display(), i + 1))?;
    }
    Ok(rows)
}

/// Replays recorded decisions of one method instead of running it.
pub struct RecordedJudge<'a> {
    name: String,
    store: &'a kbrank_core::KnowledgeStore,
    outputs: BTreeMap<(String, String, String), PreferenceJudgment>,
}

impl<'a> RecordedJudge<'a> {
    pub fn new(method: &str, store: &'a kbrank_core::KnowledgeStore, rows: &[RecordedOutput]) -> Self {
        let outputs = rows
            .iter()
            .filter(|r| r.method == method)
            .map(|r| ((r.entity.clone(), r.prop_a.clone(), r.prop_b.clone()), r.judgment().expect("validated on load")))
            .collect();
        Self { name: format!("recorded:{method}"), store, outputs }
    }

    fn lookup(&self, e: &str, p: &str, q: &str) -> Option<PreferenceJudgment> {
        let key = |a: &str, b: &str| (e.to_string(), a.to_string(), b.to_string());
        self.outputs.get(&key(p, q)).copied().or_else(|| self.outputs.get(&key(q, p)).map(|j| j.swapped()))
    }
}

impl PreferenceJudge for RecordedJudge<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn judge(&self, e: &EntityId, p: &PropertyId, q: &PropertyId) -> Result<PreferenceJudgment, JudgeError> {
        let entity = self.store.entity(e)?;
        let (pl, ql) = (&self.store.property(p)?.label, &self.store.property(q)?.label);
        self.lookup(e.as_str(), p.as_str(), q.as_str())
            .or_else(|| self.lookup(&entity.label, pl, ql))
            .ok_or_else(|| JudgeError::Abstain(format!("no recorded output for {} / {pl} / {ql}", entity.label)))
    }
}

/// Lazily built, shared resources for constructing judges over one workspace.
pub struct Session<'w> {
    pub ws: &'w Workspace,
    pivot: DiskPivotCache<'w>,
    lsi: OnceLock<Result<TopicModel, String>>,
    lda: OnceLock<Result<TopicModel, String>>,
    search: OnceLock<Result<FixtureProvider, String>>,
    recorded: OnceLock<Result<Vec<RecordedOutput>, String>>,
}

impl<'w> Session<'w> {
    pub fn new(ws: &'w Workspace) -> Self {
        let features = ArticleFeatures::new(&ws.store, &ws.corpus, ws.tfidf());
        let fp = pivot_fingerprint(&ws.store_fingerprint, &ws.corpus_fingerprint, &ws.config.pivot, &ws.config.regression);
        let dir = ws.config.cache_dir().join("pivot").join(fp);
        let pivot = DiskPivotCache::new(features, ws.corpus.vocabulary(), ws.config.pivot, ws.config.regression, Some(dir));
        Self {
            ws,
            pivot,
            lsi: OnceLock::new(),
            lda: OnceLock::new(),
            search: OnceLock::new(),
            recorded: OnceLock::new(),
        }
    }

    pub fn pivot_cache(&self) -> &DiskPivotCache<'w> {
        &self.pivot
    }

    /// Where the model of this kind is cached for the current corpus and settings.
    pub fn topic_model_path(&self, kind: TopicKind) -> PathBuf {
        let cfg = &self.ws.config;
        let settings = match kind {
            TopicKind::Lsi => toml::to_string(&cfg.lsi),
            TopicKind::Lda => toml::to_string(&cfg.lda),
        }
        .expect("settings serialize");
        let fp = Fingerprint::new().part("corpus", self.ws.corpus_fingerprint.as_bytes()).part(kind.as_str(), settings.as_bytes()).finish();
        cfg.cache_dir().join("topics").join(fp).join(format!("{}.json", kind.as_str()))
    }

    /// Trains a topic model from scratch and stores it in the cache.
    pub fn train_topic_model(&self, kind: TopicKind) -> Result<TopicModel, String> {
        let ws = self.ws;
        let vocab = ws.corpus.vocabulary();
        let model = match kind {
            TopicKind::Lsi => {
                let tfidf = ws.tfidf.as_ref().map_err(|e| e.to_string())?.clone();
                let fit = train_lsi(&ws.corpus, &tfidf, ws.config.lsi.k, &ws.config.lsi.solver()).map_err(|e| e.to_string())?;
                TopicModel::Lsi { model: fit.model, tfidf }
            }
            TopicKind::Lda => {
                let bags: Vec<_> = ws.corpus.documents().map(|(_, b)| b).collect();
                TopicModel::Lda(train_lda(bags, vocab.len(), &ws.config.lda).map_err(|e| e.to_string())?)
            }
        };
        let path = self.topic_model_path(kind);
        if let Err(e) = save_topic_model(&path, &model, vocab, &ws.config.lsi.solver()) {
            log::warn!("could not cache {} model: {e}", kind.as_str());
        }
        Ok(model)
    }

    /// The cached model if present and valid, else a freshly trained one.
    pub fn topic_model(&self, kind: TopicKind) -> Result<&TopicModel, String> {
        let cell = match kind {
            TopicKind::Lsi => &self.lsi,
            TopicKind::Lda => &self.lda,
        };
        cell.get_or_init(|| {
            let path = self.topic_model_path(kind);
            if path.is_file() {
                match load_topic_model(&path, self.ws.corpus.vocabulary()) {
                    Ok(m) => return Ok(m),
                    Err(e) => log::warn!("retraining {}: {e}", kind.as_str()),
                }
            }
            log::info!("training {} model", kind.as_str());
            self.train_topic_model(kind)
        })
        .as_ref()
        .map_err(|e| e.clone())
    }

    fn search_provider(&self) -> Result<&FixtureProvider, String> {
        self.search
            .get_or_init(|| {
                let cfg = &self.ws.config;
                let path = cfg.input("search_counts", &cfg.paths.search_counts).map_err(|e| e.to_string())?;
                crate::formats::read_search_counts(&path).map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| e.clone())
    }

    fn recorded_outputs(&self) -> Result<&[RecordedOutput], String> {
        self.recorded
            .get_or_init(|| {
                let cfg = &self.ws.config;
                let path = cfg.input("recorded", &cfg.paths.recorded).map_err(|e| e.to_string())?;
                read_recorded(&path)
            })
            .as_deref()
            .map_err(|e| e.clone())
    }

    /// Builds the judge for a method name.
    pub fn judge(&self, method: &str) -> Result<Box<dyn PreferenceJudge + '_>, MethodError> {
        let ws = self.ws;
        let store = &ws.store;
        Ok(match method {
            "human_frequency" => Box::new(HumanFrequency::new(store)),
            "occupation_frequency" => Box::new(OccupationFrequency::new(store)),
            "property_suggester" => Box::new(PropertySuggester::new(store)),
            "search_count" => Box::new(SearchCount::new(store, self.search_provider().map_err(|e| unavailable(method, e))?)),
            "regression_counts" | "regression_tfidf" => {
                let mode = if method == "regression_counts" { FeatureMode::Counts } else { FeatureMode::TfIdf };
                if mode == FeatureMode::TfIdf {
                    if let Err(e) = &ws.tfidf {
                        return Err(unavailable(method, e));
                    }
                }
                let features = ArticleFeatures::new(store, &ws.corpus, ws.tfidf());
                Box::new(PivotJudge::new(features, &self.pivot, mode))
            }
            "lsi" | "lda" => {
                let kind = if method == "lsi" { TopicKind::Lsi } else { TopicKind::Lda };
                let model = self.topic_model(kind).map_err(|e| unavailable(method, e))?;
                Box::new(SemanticJudge::new(store, &ws.corpus, &ws.preprocessor, model))
            }
            "random" => Box::new(RandomJudge::new(ws.config.evaluation.random_seed)),
            "echo" => return Err(MethodError::NeedsGold(method.into())),
            _ => {
                if let Some(name) = method.strip_prefix("ensemble:") {
                    let spec = ws.config.ensemble(name).ok_or_else(|| MethodError::UnknownEnsemble(name.into()))?;
                    let members = spec.members().iter().map(|m| self.judge(m)).collect::<Result<Vec<_>, _>>()?;
                    Box::new(EnsembleJudge::new(spec.clone(), members).map_err(|e| unavailable(method, e))?)
                } else if let Some(inner) = method.strip_prefix("recorded:") {
                    let rows = self.recorded_outputs().map_err(|e| unavailable(method, e))?;
                    Box::new(RecordedJudge::new(inner, store, rows))
                } else {
                    return Err(MethodError::Unknown(method.into()));
                }
            }
        })
    }
}

/// Store ids a gold record refers to: explicit ids where present, else the
/// labels looked up in the store.
pub fn resolve_record(store: &kbrank_core::KnowledgeStore, r: &GoldRecord) -> Option<(EntityId, PropertyId, PropertyId)> {
    let e = r.entity_id.clone().or_else(|| store.entity_by_label(&r.entity_label).cloned())?;
    let a = r.prop_a_id.clone().or_else(|| store.property_by_label(&r.prop_a).cloned())?;
    let b = r.prop_b_id.clone().or_else(|| store.property_by_label(&r.prop_b).cloned())?;
    Some((e, a, b))
}

/// Stable identifier of a gold record within a file: its 1-based row number.
pub fn record_id(index: usize) -> String {
    format!("r{:04}", index + 1)
}

/// The judge's verdicts on every record; unresolved records and errors are abstentions.
pub fn judge_records(judge: &dyn PreferenceJudge, resolved: &[Option<(EntityId, PropertyId, PropertyId)>]) -> Vec<Cell> {
    resolved
        .iter()
        .map(|r| match r {
            Some((e, p, q)) => {
                let result = judge.judge(e, p, q);
                if let Err(err) = &result {
                    log::debug!("{} on {e} {p} {q}: {err}", judge.name());
                }
                Cell::from_result(&result)
            }
            None => Cell::Abstain,
        })
        .collect()
}

/// The annotators' own majority, as a method.
pub fn echo_column(records: &[GoldRecord]) -> Vec<Cell> {
    records.iter().map(|r| r.preferred().as_cell()).collect()
}
