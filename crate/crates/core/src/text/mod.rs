//! Text preprocessing and sparse document representations.

mod stem;
mod vocab;

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub use stem::stem;
pub use vocab::{
    build_vocabulary, vectorize, BagOfWords, Corpus, FeatureMode, SparseVector, TextError, TfIdfModel, Vocabulary,
};

/// Identifier linking a corpus document to an entity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(transparent))]
pub struct DocumentId(pub String);

impl fmt::Display for DocumentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DocumentId {
    fn from(s: &str) -> Self {
        Self(String::from(s))
    }
}

/// Version tag of the bundled English stop list.
pub const STOPWORDS_VERSION: &str = "en-v1";
const BUNDLED_STOPWORDS: &str = include_str!("stopwords_en_v1.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopList {
    words: BTreeSet<String>,
}

impl StopList {
    /// One term per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Self { words }
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_STOPWORDS)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl Default for StopList {
    fn default() -> Self {
        Self::bundled()
    }
}

/// Lowercases, splits on anything that is not alphanumeric, drops stop words
/// and stems what remains.
#[derive(Debug, Clone, Default)]
pub struct Preprocessor {
    stop: StopList,
}

impl Preprocessor {
    pub fn new(stop: StopList) -> Self {
        Self { stop }
    }

    pub fn stop_list(&self) -> &StopList {
        &self.stop
    }

    pub fn tokens(&self, text: &str) -> Vec<String> {
        normalize(text)
            .filter(|t| !self.stop.contains(t))
            .map(|t| stem(&t))
            .filter(|t| !t.is_empty())
            .collect()
    }
}

/// Preprocesses with the bundled stop list.
pub fn preprocess(text: &str) -> Vec<String> {
    Preprocessor::default().tokens(text)
}

/// Case-folded alphanumeric runs of `text`.
pub fn normalize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn empty_text() {
        assert!(preprocess("").is_empty());
        assert!(preprocess("  ,.;  ").is_empty());
    }

    #[test]
    fn drops_stop_words_and_punctuation() {
        assert_eq!(preprocess("The priests, praying."), vec![stem("priests"), stem("praying")]);
        assert_eq!(preprocess("The priests, praying."), vec!["priest", "prai"]);
    }

    #[test]
    fn case_folding() {
        let t = preprocess("FOOTBALL football");
        assert_eq!(t.len(), 2);
        assert_eq!(t[0], t[1]);
    }

    #[test]
    fn bundled_list_loads() {
        let s = StopList::bundled();
        assert!(s.contains("the"));
        assert!(!s.contains("footbal"));
        assert_eq!(s.len(), 153);
    }
}
