//! In-memory knowledge store of entities and the properties asserted for them.
//!
//! Only property *presence* matters: an entity either has a property or it
//! does not, regardless of how many statements use it. All counts are built
//! once at ingestion and the store is immutable afterwards.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::text::DocumentId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("identifier must not be empty")]
    EmptyId,
    #[error("empty store")]
    EmptyStore,
    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),
    #[error("unknown property {0}")]
    UnknownProperty(PropertyId),
    #[error("pivot properties must differ, got {0} twice")]
    SamePivot(PropertyId),
    #[error("duplicate property definition {0}")]
    DuplicateProperty(PropertyId),
    #[error("property {0} has an empty label")]
    EmptyLabel(PropertyId),
}

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        #[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(try_from = "String", into = "String"))]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Result<Self, StoreError> {
                let id = id.into();
                if id.is_empty() {
                    return Err(StoreError::EmptyId);
                }
                Ok(Self(id))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl TryFrom<String> for $name {
            type Error = StoreError;
            fn try_from(s: String) -> Result<Self, StoreError> {
                Self::new(s)
            }
        }

        impl From<$name> for String {
            fn from(id: $name) -> String {
                id.0
            }
        }

        impl core::str::FromStr for $name {
            type Err = StoreError;
            fn from_str(s: &str) -> Result<Self, StoreError> {
                Self::new(s)
            }
        }
    };
}

id_type!(
    /// Item identifier such as `Q42`.
    EntityId
);
id_type!(
    /// Property identifier such as `P413`.
    PropertyId
);

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EntityRecord {
    pub id: EntityId,
    pub label: String,
    /// Short biographical sketch.
    pub description: String,
    pub occupations: BTreeSet<EntityId>,
    pub properties: BTreeSet<PropertyId>,
    /// Classes the entity is an instance of. Only consulted by [`IngestFilter::class`].
    #[cfg_attr(feature = "serde", serde(default))]
    pub instance_of: BTreeSet<EntityId>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub article_ref: Option<DocumentId>,
}

impl EntityRecord {
    pub fn new(id: EntityId, label: impl Into<String>) -> Self {
        Self {
            id,
            label: label.into(),
            description: String::new(),
            occupations: BTreeSet::new(),
            properties: BTreeSet::new(),
            instance_of: BTreeSet::new(),
            article_ref: None,
        }
    }

    pub fn has(&self, p: &PropertyId) -> bool {
        self.properties.contains(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PropertyDef {
    pub id: PropertyId,
    pub label: String,
    #[cfg_attr(feature = "serde", serde(default))]
    pub description: String,
    #[cfg_attr(feature = "serde", serde(default))]
    pub is_identifier: bool,
}

impl PropertyDef {
    pub fn new(id: PropertyId, label: impl Into<String>) -> Self {
        Self { id, label: label.into(), description: String::new(), is_identifier: false }
    }
}

/// Which entities and properties survive ingestion.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct IngestFilter {
    /// Keep only entities that are an instance of this class.
    pub class: Option<EntityId>,
    /// Drop properties whose definition is flagged as an identifier.
    pub drop_identifiers: bool,
    /// Drop properties used by fewer surviving entities than this.
    pub min_usage: u64,
}

/// An entity record that was rejected during ingestion; ingestion continues.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedRecord {
    /// Zero-based position in the input stream.
    pub index: usize,
    pub id: EntityId,
    pub reason: &'static str,
}

#[derive(Debug)]
pub struct Ingested {
    pub store: KnowledgeStore,
    pub skipped: Vec<SkippedRecord>,
}

#[derive(Debug, Clone, Default)]
pub struct KnowledgeStore {
    entities: BTreeMap<EntityId, EntityRecord>,
    properties: BTreeMap<PropertyId, PropertyDef>,
    usage: BTreeMap<PropertyId, u64>,
    /// Keyed by `(p, q)` with `p < q`.
    cooccurrence: BTreeMap<(PropertyId, PropertyId), u64>,
    /// Sorted holders per property.
    holders: BTreeMap<PropertyId, Vec<EntityId>>,
    by_occupation: BTreeMap<EntityId, Vec<EntityId>>,
    entity_labels: BTreeMap<String, EntityId>,
    property_labels: BTreeMap<String, PropertyId>,
}

impl KnowledgeStore {
    /// Builds a store from entity records and property definitions.
    ///
    /// Properties referenced by an entity but never declared are registered
    /// with their id as label. Entities repeating an already ingested id are
    /// skipped and reported.
    pub fn ingest<E, P>(entities: E, properties: P, filter: &IngestFilter) -> Result<Ingested, StoreError>
    where
        E: IntoIterator<Item = EntityRecord>,
        P: IntoIterator<Item = PropertyDef>,
    {
        let mut defs = BTreeMap::new();
        for def in properties {
            if def.label.is_empty() {
                return Err(StoreError::EmptyLabel(def.id));
            }
            if defs.contains_key(&def.id) {
                return Err(StoreError::DuplicateProperty(def.id));
            }
            defs.insert(def.id.clone(), def);
        }

        let mut kept: BTreeMap<EntityId, EntityRecord> = BTreeMap::new();
        let mut skipped = Vec::new();
        for (index, mut record) in entities.into_iter().enumerate() {
            if let Some(class) = &filter.class {
                if !record.instance_of.contains(class) {
                    continue;
                }
            }
            if kept.contains_key(&record.id) {
                skipped.push(SkippedRecord { index, id: record.id, reason: "duplicate entity id" });
                continue;
            }
            for p in &record.properties {
                defs.entry(p.clone()).or_insert_with(|| PropertyDef::new(p.clone(), p.as_str()));
            }
            if filter.drop_identifiers {
                record.properties.retain(|p| !defs[p].is_identifier);
            }
            kept.insert(record.id.clone(), record);
        }
        if kept.is_empty() {
            return Err(StoreError::EmptyStore);
        }
        if filter.drop_identifiers {
            defs.retain(|_, d| !d.is_identifier);
        }

        if filter.min_usage > 0 {
            let mut usage: BTreeMap<&PropertyId, u64> = BTreeMap::new();
            for record in kept.values() {
                for p in &record.properties {
                    *usage.entry(p).or_default() += 1;
                }
            }
            let surviving: BTreeSet<PropertyId> = usage
                .into_iter()
                .filter(|(_, n)| *n >= filter.min_usage)
                .map(|(p, _)| p.clone())
                .collect();
            defs.retain(|p, _| surviving.contains(p));
            for record in kept.values_mut() {
                record.properties.retain(|p| surviving.contains(p));
            }
        }

        Ok(Ingested { store: Self::index(kept, defs), skipped })
    }

    fn index(entities: BTreeMap<EntityId, EntityRecord>, properties: BTreeMap<PropertyId, PropertyDef>) -> Self {
        let mut usage: BTreeMap<PropertyId, u64> = properties.keys().map(|p| (p.clone(), 0)).collect();
        let mut cooccurrence = BTreeMap::new();
        let mut holders: BTreeMap<PropertyId, Vec<EntityId>> = BTreeMap::new();
        let mut by_occupation: BTreeMap<EntityId, Vec<EntityId>> = BTreeMap::new();
        let mut entity_labels = BTreeMap::new();

        // BTreeMap iteration is sorted by id, so every holder list is sorted too.
        for record in entities.values() {
            let props: Vec<&PropertyId> = record.properties.iter().collect();
            for (i, p) in props.iter().enumerate() {
                *usage.get_mut(*p).expect("registered at ingestion") += 1;
                holders.entry((*p).clone()).or_default().push(record.id.clone());
                for q in &props[i + 1..] {
                    *cooccurrence.entry(((*p).clone(), (*q).clone())).or_insert(0) += 1;
                }
            }
            for occ in &record.occupations {
                by_occupation.entry(occ.clone()).or_default().push(record.id.clone());
            }
            entity_labels.entry(record.label.clone()).or_insert_with(|| record.id.clone());
        }
        let property_labels = properties
            .values()
            .rev()
            .map(|d| (d.label.clone(), d.id.clone()))
            .collect();

        Self { entities, properties, usage, cooccurrence, holders, by_occupation, entity_labels, property_labels }
    }

    pub fn entity(&self, e: &EntityId) -> Result<&EntityRecord, StoreError> {
        self.entities.get(e).ok_or_else(|| StoreError::UnknownEntity(e.clone()))
    }

    pub fn property(&self, p: &PropertyId) -> Result<&PropertyDef, StoreError> {
        self.properties.get(p).ok_or_else(|| StoreError::UnknownProperty(p.clone()))
    }

    pub fn entities(&self) -> impl Iterator<Item = &EntityRecord> {
        self.entities.values()
    }

    pub fn properties(&self) -> impl Iterator<Item = &PropertyDef> {
        self.properties.values()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn property_count(&self) -> usize {
        self.properties.len()
    }

    /// Looks up an entity by exact label; the smallest id wins on collisions.
    pub fn entity_by_label(&self, label: &str) -> Option<&EntityId> {
        self.entity_labels.get(label)
    }

    /// Looks up a property by exact label; the smallest id wins on collisions.
    pub fn property_by_label(&self, label: &str) -> Option<&PropertyId> {
        self.property_labels.get(label)
    }

    /// Number of entities having `p`.
    pub fn usage(&self, p: &PropertyId) -> Result<u64, StoreError> {
        self.usage.get(p).copied().ok_or_else(|| StoreError::UnknownProperty(p.clone()))
    }

    /// Number of entities having both `p` and `q`; `cooccurrence(p, p) == usage(p)`.
    pub fn cooccurrence(&self, p: &PropertyId, q: &PropertyId) -> Result<u64, StoreError> {
        self.usage(p)?;
        self.usage(q)?;
        if p == q {
            return self.usage(p);
        }
        let key = if p < q { (p.clone(), q.clone()) } else { (q.clone(), p.clone()) };
        Ok(self.cooccurrence.get(&key).copied().unwrap_or(0))
    }

    /// Entities with `p`, sorted by id.
    pub fn holders(&self, p: &PropertyId) -> &[EntityId] {
        self.holders.get(p).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All other entities sharing at least one occupation with `e`.
    pub fn occupation_cohort(&self, e: &EntityId) -> Result<BTreeSet<EntityId>, StoreError> {
        let record = self.entity(e)?;
        let mut cohort = BTreeSet::new();
        for occ in &record.occupations {
            if let Some(members) = self.by_occupation.get(occ) {
                cohort.extend(members.iter().filter(|m| *m != e).cloned());
            }
        }
        Ok(cohort)
    }

    /// Splits the holders of `p` and `q` into those having only `p` and those
    /// having only `q`. Each side is sorted by id and truncated to `cap`.
    pub fn split_by_pivot(
        &self,
        p: &PropertyId,
        q: &PropertyId,
        cap: usize,
    ) -> Result<(Vec<EntityId>, Vec<EntityId>), StoreError> {
        if p == q {
            return Err(StoreError::SamePivot(p.clone()));
        }
        let only_p = sorted_difference(self.holders(p), self.holders(q), cap);
        let only_q = sorted_difference(self.holders(q), self.holders(p), cap);
        Ok((only_p, only_q))
    }
}

fn sorted_difference(a: &[EntityId], b: &[EntityId], cap: usize) -> Vec<EntityId> {
    let mut out = Vec::new();
    let mut j = 0;
    for x in a {
        if out.len() == cap {
            break;
        }
        while j < b.len() && b[j] < *x {
            j += 1;
        }
        if j < b.len() && b[j] == *x {
            continue;
        }
        out.push(x.clone());
    }
    out
}
