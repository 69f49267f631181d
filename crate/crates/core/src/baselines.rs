//! Count-based baselines: global usage, occupation-cohort usage, web search
//! counts and association-rule scores.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};

use crate::judge::{JudgeError, PreferenceJudge, PreferenceJudgment};
use crate::store::{EntityId, KnowledgeStore, PropertyId, StoreError};

/// Prefers the property asserted for more entities overall.
#[derive(Debug, Clone, Copy)]
pub struct HumanFrequency<'a> {
    store: &'a KnowledgeStore,
}

impl<'a> HumanFrequency<'a> {
    pub fn new(store: &'a KnowledgeStore) -> Self {
        Self { store }
    }
}

impl PreferenceJudge for HumanFrequency<'_> {
    fn name(&self) -> &str {
        "human_frequency"
    }

    fn judge(&self, _e: &EntityId, p: &PropertyId, q: &PropertyId) -> Result<PreferenceJudgment, JudgeError> {
        let a = self.store.usage(p)?;
        let b = self.store.usage(q)?;
        Ok(PreferenceJudgment::from_scores(a as f64, b as f64))
    }
}

/// Like [`HumanFrequency`] but counts only entities sharing an occupation
/// with the judged entity. Falls back to global counts when the cohort is
/// empty.
#[derive(Debug, Clone, Copy)]
pub struct OccupationFrequency<'a> {
    store: &'a KnowledgeStore,
}

impl<'a> OccupationFrequency<'a> {
    pub fn new(store: &'a KnowledgeStore) -> Self {
        Self { store }
    }
}

impl PreferenceJudge for OccupationFrequency<'_> {
    fn name(&self) -> &str {
        "occupation_frequency"
    }

    fn judge(&self, e: &EntityId, p: &PropertyId, q: &PropertyId) -> Result<PreferenceJudgment, JudgeError> {
        self.store.usage(p)?;
        self.store.usage(q)?;
        let cohort = self.store.occupation_cohort(e)?;
        if cohort.is_empty() {
            return HumanFrequency::new(self.store).judge(e, p, q);
        }
        let (mut a, mut b) = (0u64, 0u64);
        for member in &cohort {
            let record = self.store.entity(member)?;
            a += u64::from(record.has(p));
            b += u64::from(record.has(q));
        }
        Ok(PreferenceJudgment::from_scores(a as f64, b as f64))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderError(pub String);

/// Source of web search result counts.
pub trait SearchCountProvider {
    fn count(&self, query: &str) -> Result<u64, ProviderError>;
}

impl<P: SearchCountProvider + ?Sized> SearchCountProvider for &P {
    fn count(&self, query: &str) -> Result<u64, ProviderError> {
        (**self).count(query)
    }
}

/// Offline provider answering from recorded `(query, count)` pairs.
#[derive(Debug, Clone, Default)]
pub struct FixtureProvider {
    counts: BTreeMap<String, u64>,
}

impl FixtureProvider {
    pub fn new(counts: impl IntoIterator<Item = (String, u64)>) -> Self {
        Self { counts: counts.into_iter().collect() }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

impl SearchCountProvider for FixtureProvider {
    fn count(&self, query: &str) -> Result<u64, ProviderError> {
        self.counts.get(query).copied().ok_or_else(|| ProviderError(String::from("no recorded count")))
    }
}

/// Query string for an entity/property pair: `"<entity label> <property label>"`.
pub fn search_query(entity_label: &str, property_label: &str) -> String {
    format!("{entity_label} {property_label}")
}

/// Prefers the property whose query returns more search results.
#[derive(Debug, Clone)]
pub struct SearchCount<'a, P> {
    store: &'a KnowledgeStore,
    provider: P,
}

impl<'a, P: SearchCountProvider> SearchCount<'a, P> {
    pub fn new(store: &'a KnowledgeStore, provider: P) -> Self {
        Self { store, provider }
    }

    fn count(&self, entity_label: &str, p: &PropertyId) -> Result<u64, JudgeError> {
        let query = search_query(entity_label, &self.store.property(p)?.label);
        self.provider.count(&query).map_err(|ProviderError(message)| JudgeError::Provider { query, message })
    }
}

impl<P: SearchCountProvider> PreferenceJudge for SearchCount<'_, P> {
    fn name(&self) -> &str {
        "search_count"
    }

    fn judge(&self, e: &EntityId, p: &PropertyId, q: &PropertyId) -> Result<PreferenceJudgment, JudgeError> {
        let label = &self.store.entity(e)?.label;
        let a = self.count(label, p)?;
        let b = self.count(label, q)?;
        Ok(PreferenceJudgment::from_scores(a as f64, b as f64))
    }
}

/// Sum of squared confidences `conf(p -> candidate)^2` over the entity's own
/// properties `p` other than the candidate, with
/// `conf(p -> c) = cooccurrence(p, c) / usage(p)`.
pub fn association_score(store: &KnowledgeStore, e: &EntityId, candidate: &PropertyId) -> Result<f64, StoreError> {
    association_score_for(store, &store.entity(e)?.properties, candidate)
}

/// [`association_score`] for an arbitrary property set scored against the
/// store's rule statistics, e.g. an item that is not part of the store.
pub fn association_score_for(
    store: &KnowledgeStore,
    properties: &BTreeSet<PropertyId>,
    candidate: &PropertyId,
) -> Result<f64, StoreError> {
    store.usage(candidate)?;
    let mut score = 0.0;
    for p in properties.iter().filter(|p| *p != candidate) {
        let support = store.usage(p)?;
        if support == 0 {
            continue;
        }
        let joint = store.cooccurrence(p, candidate)?;
        score += (joint * joint) as f64 / (support * support) as f64;
    }
    Ok(score)
}

/// Prefers the property with the higher association score, i.e. the one an
/// association-rule property suggester without thresholds ranks higher.
#[derive(Debug, Clone, Copy)]
pub struct PropertySuggester<'a> {
    store: &'a KnowledgeStore,
}

impl<'a> PropertySuggester<'a> {
    pub fn new(store: &'a KnowledgeStore) -> Self {
        Self { store }
    }
}

impl PreferenceJudge for PropertySuggester<'_> {
    fn name(&self) -> &str {
        "property_suggester"
    }

    fn judge(&self, e: &EntityId, p: &PropertyId, q: &PropertyId) -> Result<PreferenceJudgment, JudgeError> {
        let a = association_score(self.store, e, p)?;
        let b = association_score(self.store, e, q)?;
        Ok(PreferenceJudgment::from_scores(a, b))
    }
}

impl core::fmt::Display for ProviderError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ProviderError {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}
