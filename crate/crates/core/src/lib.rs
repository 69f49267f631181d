//! Entity-specific ranking of knowledge-base properties.
//!
//! Given an entity and two of its candidate properties, every method in this
//! crate answers the same question: which of the two is more interesting to
//! know about for that entity? The methods range from plain usage counts over
//! association rules and web search counts to transfer-learned logistic
//! regression, latent topic similarity and majority-vote ensembles. The
//! [`gold`] module evaluates them against crowd preference judgments.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, model caching
//! and the command-line front end live in the companion `kbrank` crate.

#![no_std]

extern crate alloc;

pub mod baselines;
pub mod ensemble;
pub mod gold;
pub mod judge;
pub mod pivot;
pub mod semantic;
pub mod store;
pub mod text;

pub use judge::{JudgeError, PreferenceJudge, PreferenceJudgment, Winner};
pub use store::{EntityId, EntityRecord, IngestFilter, KnowledgeStore, PropertyDef, PropertyId};
