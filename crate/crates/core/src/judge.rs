//! The contract every ranking method implements.

use alloc::string::String;

use thiserror::Error;

use crate::store::{EntityId, PropertyId, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "UPPERCASE"))]
pub enum Winner {
    First,
    Second,
    Tie,
}

impl Winner {
    /// The winner after swapping the two properties.
    pub fn mirrored(self) -> Self {
        match self {
            Winner::First => Winner::Second,
            Winner::Second => Winner::First,
            Winner::Tie => Winner::Tie,
        }
    }
}

/// Which of two properties a method prefers, with the method-specific scores
/// it compared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreferenceJudgment {
    pub winner: Winner,
    pub score_first: f64,
    pub score_second: f64,
}

impl PreferenceJudgment {
    /// Larger score wins; equal (or incomparable) scores tie.
    pub fn from_scores(score_first: f64, score_second: f64) -> Self {
        let winner = if score_first > score_second {
            Winner::First
        } else if score_second > score_first {
            Winner::Second
        } else {
            Winner::Tie
        };
        Self { winner, score_first, score_second }
    }

    pub fn swapped(self) -> Self {
        Self { winner: self.winner.mirrored(), score_first: self.score_second, score_second: self.score_first }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JudgeError {
    #[error(transparent)]
    Store(#[from] StoreError),
    /// The method cannot judge this pair. Distinct from a tie.
    #[error("abstain: {0}")]
    Abstain(String),
    #[error("search count provider failed for query {query:?}: {message}")]
    Provider { query: String, message: String },
}

impl JudgeError {
    pub fn is_abstention(&self) -> bool {
        matches!(self, JudgeError::Abstain(_))
    }
}

/// Decides which of `p` and `q` is more interesting for entity `e`.
///
/// Implementations must be antisymmetric: `judge(e, q, p).winner` is the
/// mirror of `judge(e, p, q).winner`.
pub trait PreferenceJudge {
    fn name(&self) -> &str;

    fn judge(&self, e: &EntityId, p: &PropertyId, q: &PropertyId) -> Result<PreferenceJudgment, JudgeError>;
}

impl<J: PreferenceJudge + ?Sized> PreferenceJudge for &J {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn judge(&self, e: &EntityId, p: &PropertyId, q: &PropertyId) -> Result<PreferenceJudgment, JudgeError> {
        (**self).judge(e, p, q)
    }
}

impl<J: PreferenceJudge + ?Sized> PreferenceJudge for alloc::boxed::Box<J> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn judge(&self, e: &EntityId, p: &PropertyId, q: &PropertyId) -> Result<PreferenceJudgment, JudgeError> {
        (**self).judge(e, p, q)
    }
}
