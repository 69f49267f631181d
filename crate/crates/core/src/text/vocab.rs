use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use super::{DocumentId, Preprocessor};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TextError {
    #[error("corpus has no documents")]
    EmptyCorpus,
    #[error("empty vocabulary")]
    EmptyVocabulary,
    #[error("empty vocabulary after pruning")]
    EmptyAfterPruning,
    #[error("prune fractions must lie in [0, 1), got low={low} high={high}")]
    InvalidPrune { low: f64, high: f64 },
    #[error("duplicate document id {0}")]
    DuplicateDocument(DocumentId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "lowercase"))]
pub enum FeatureMode {
    /// Raw term counts.
    Counts,
    /// Counts weighted by inverse document frequency over the pruned vocabulary.
    TfIdf,
}

impl FeatureMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::Counts => "counts",
            FeatureMode::TfIdf => "tfidf",
        }
    }
}

/// Term dictionary with document frequencies. Term ids are dense and
/// assigned in lexicographic term order.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: BTreeMap<String, usize>,
    doc_frequency: Vec<u64>,
    total_docs: u64,
}

impl Vocabulary {
    pub fn from_parts(terms: Vec<String>, doc_frequency: Vec<u64>, total_docs: u64) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { terms, index, doc_frequency, total_docs }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn id(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, id: usize) -> Option<&str> {
        self.terms.get(id).map(String::as_str)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_frequency(&self, id: usize) -> u64 {
        self.doc_frequency[id]
    }

    pub fn doc_frequencies(&self) -> &[u64] {
        &self.doc_frequency
    }

    pub fn total_docs(&self) -> u64 {
        self.total_docs
    }

    /// Bag over this vocabulary; out-of-vocabulary tokens are dropped.
    pub fn bag<S: AsRef<str>>(&self, tokens: &[S]) -> BagOfWords {
        let mut counts = BTreeMap::new();
        for t in tokens {
            if let Some(id) = self.id(t.as_ref()) {
                *counts.entry(id).or_insert(0) += 1;
            }
        }
        BagOfWords { counts }
    }
}

pub fn build_vocabulary<S: AsRef<str>>(docs: &[Vec<S>]) -> Result<Vocabulary, TextError> {
    if docs.is_empty() {
        return Err(TextError::EmptyCorpus);
    }
    let mut df: BTreeMap<&str, u64> = BTreeMap::new();
    for doc in docs {
        let mut seen: Vec<&str> = doc.iter().map(AsRef::as_ref).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let (terms, freqs) = df.into_iter().map(|(t, n)| (String::from(t), n)).unzip();
    Ok(Vocabulary::from_parts(terms, freqs, docs.len() as u64))
}

/// Sparse term counts keyed by term id. Every stored count is at least one.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BagOfWords {
    counts: BTreeMap<usize, u32>,
}

impl BagOfWords {
    pub fn from_counts(counts: impl IntoIterator<Item = (usize, u32)>) -> Self {
        let mut out = BTreeMap::new();
        for (id, n) in counts {
            if n > 0 {
                *out.entry(id).or_insert(0) += n;
            }
        }
        Self { counts: out }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.counts.iter().map(|(&id, &n)| (id, n))
    }

    pub fn count(&self, id: usize) -> u32 {
        self.counts.get(&id).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().map(|&n| u64::from(n)).sum()
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Sorted `(term id, weight)` pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector(pub Vec<(usize, f64)>);

impl SparseVector {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0.iter().copied()
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.0.iter().map(|&(i, x)| dense[i] * x).sum()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().map(|&(_, x)| x).sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Inverse document frequencies over the vocabulary left after removing the
/// most and least frequent terms (by document frequency).
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfModel {
    idf: BTreeMap<usize, f64>,
    prune_low: f64,
    prune_high: f64,
}

impl TfIdfModel {
    /// Ranks terms by document frequency (descending, ties by term), removes
    /// the top `prune_high` and bottom `prune_low` fractions and weights the
    /// survivors by `ln(total_docs / df)`.
    ///
    /// `floor(|V| * (1 - low - high))` terms are retained; of the removed
    /// terms, `floor(|V| * high)` come from the top.
    pub fn fit(vocab: &Vocabulary, prune_low: f64, prune_high: f64) -> Result<Self, TextError> {
        let valid = |f: f64| (0.0..1.0).contains(&f);
        if !valid(prune_low) || !valid(prune_high) {
            return Err(TextError::InvalidPrune { low: prune_low, high: prune_high });
        }
        if vocab.is_empty() {
            return Err(TextError::EmptyVocabulary);
        }
        let n = vocab.len();
        let keep_frac = 1.0 - prune_low - prune_high;
        let retained = if keep_frac <= 0.0 { 0 } else { libm::floor(n as f64 * keep_frac + 1e-9) as usize };
        if retained == 0 {
            return Err(TextError::EmptyAfterPruning);
        }
        let drop_high = (libm::floor(n as f64 * prune_high + 1e-9) as usize).min(n - retained);

        let mut ranked: Vec<usize> = (0..n).collect();
        ranked.sort_by(|&a, &b| {
            vocab.doc_frequency(b).cmp(&vocab.doc_frequency(a)).then_with(|| vocab.terms[a].cmp(&vocab.terms[b]))
        });
        let total = vocab.total_docs() as f64;
        let idf = ranked[drop_high..drop_high + retained]
            .iter()
            .map(|&id| (id, libm::log(total / vocab.doc_frequency(id) as f64)))
            .collect();
        Ok(Self { idf, prune_low, prune_high })
    }

    pub fn from_parts(idf: BTreeMap<usize, f64>, prune_low: f64, prune_high: f64) -> Self {
        Self { idf, prune_low, prune_high }
    }

    pub fn idf(&self, id: usize) -> Option<f64> {
        self.idf.get(&id).copied()
    }

    pub fn retained(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.idf.iter().map(|(&id, &w)| (id, w))
    }

    pub fn retained_len(&self) -> usize {
        self.idf.len()
    }

    pub fn prune_fractions(&self) -> (f64, f64) {
        (self.prune_low, self.prune_high)
    }
}

/// Raw counts without a model, `count * idf` over retained terms with one.
pub fn vectorize(model: Option<&TfIdfModel>, bag: &BagOfWords) -> SparseVector {
    match model {
        None => SparseVector(bag.iter().map(|(id, n)| (id, f64::from(n))).collect()),
        Some(m) => SparseVector(bag.iter().filter_map(|(id, n)| m.idf(id).map(|w| (id, f64::from(n) * w))).collect()),
    }
}

/// Preprocessed documents over a shared vocabulary.
#[derive(Debug, Clone)]
pub struct Corpus {
    vocabulary: Vocabulary,
    docs: BTreeMap<DocumentId, BagOfWords>,
}

impl Corpus {
    pub fn from_texts<I, S>(docs: I, pre: &Preprocessor) -> Result<Self, TextError>
    where
        I: IntoIterator<Item = (DocumentId, S)>,
        S: AsRef<str>,
    {
        Self::from_tokens(docs.into_iter().map(|(id, text)| (id, pre.tokens(text.as_ref()))))
    }

    pub fn from_tokens<I>(docs: I) -> Result<Self, TextError>
    where
        I: IntoIterator<Item = (DocumentId, Vec<String>)>,
    {
        let mut by_id: BTreeMap<DocumentId, Vec<String>> = BTreeMap::new();
        for (id, tokens) in docs {
            if by_id.contains_key(&id) {
                return Err(TextError::DuplicateDocument(id));
            }
            by_id.insert(id, tokens);
        }
        let token_lists: Vec<Vec<String>> = by_id.values().cloned().collect();
        let vocabulary = build_vocabulary(&token_lists)?;
        let docs = by_id.into_iter().map(|(id, tokens)| (id, vocabulary.bag(&tokens))).collect();
        Ok(Self { vocabulary, docs })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn bag(&self, id: &DocumentId) -> Option<&BagOfWords> {
        self.docs.get(id)
    }

    /// Documents in id order.
    pub fn documents(&self) -> impl Iterator<Item = (&DocumentId, &BagOfWords)> {
        self.docs.iter()
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| String::from(*w)).collect()
    }

    #[test]
    fn document_frequency() {
        let v = build_vocabulary(&[toks(&["a", "b"]), toks(&["a", "a"])]).unwrap();
        assert_eq!(v.total_docs(), 2);
        assert_eq!(v.doc_frequency(v.id("a").unwrap()), 2);
        assert_eq!(v.doc_frequency(v.id("b").unwrap()), 1);
        assert_eq!(build_vocabulary::<String>(&[]), Err(TextError::EmptyCorpus));
    }

    #[test]
    fn disjoint_documents() {
        let docs = [toks(&["a", "b", "a"]), toks(&["c"]), toks(&["d", "e", "f", "d"])];
        let distinct: usize = docs
            .iter()
            .map(|d| {
                let mut d = d.clone();
                d.sort();
                d.dedup();
                d.len()
            })
            .sum();
        assert_eq!(build_vocabulary(&docs).unwrap().len(), distinct);
        assert_eq!(distinct, 6);
    }

    /// Ten terms whose document frequencies are 10, 9, ..., 1.
    fn ranked_vocab() -> Vocabulary {
        let terms: Vec<String> = (0..10).map(|i| alloc::format!("t{i}")).collect();
        let df = (0..10).map(|i| 10 - i as u64).collect();
        Vocabulary::from_parts(terms, df, 10)
    }

    #[test]
    fn prune_twenty_percent_each_side() {
        let v = ranked_vocab();
        let m = TfIdfModel::fit(&v, 0.2, 0.2).unwrap();
        let kept: Vec<&str> = m.retained().map(|(id, _)| v.term(id).unwrap()).collect();
        assert_eq!(kept, vec!["t2", "t3", "t4", "t5", "t6", "t7"]);
    }

    #[test]
    fn no_pruning_keeps_everything() {
        let v = ranked_vocab();
        let m = TfIdfModel::fit(&v, 0.0, 0.0).unwrap();
        assert_eq!(m.retained_len(), 10);
        assert_eq!(m.idf(0), Some(0.0));
        assert_eq!(m.idf(9), Some(libm::log(10.0)));
    }

    #[test]
    fn pruning_everything_fails() {
        let v = Vocabulary::from_parts(vec![String::from("x")], vec![1], 1);
        assert_eq!(TfIdfModel::fit(&v, 0.2, 0.2), Err(TextError::EmptyAfterPruning));
        assert!(matches!(TfIdfModel::fit(&v, -0.1, 0.0), Err(TextError::InvalidPrune { .. })));
    }

    #[test]
    fn ties_break_by_term() {
        let terms = toks(&["b", "a", "c", "d", "e"]);
        let v = Vocabulary::from_parts(terms, vec![1, 1, 1, 1, 1], 5);
        let m = TfIdfModel::fit(&v, 0.2, 0.2).unwrap();
        // ranking by term: a(1) b(0) c d e -> drop a from the top, e from the bottom
        let kept: Vec<&str> = m.retained().map(|(id, _)| v.term(id).unwrap()).collect();
        assert_eq!(kept, vec!["b", "c", "d"]);
    }

    #[test]
    fn vectorize_modes() {
        let bag = BagOfWords::from_counts([(0, 2)]);
        let m = TfIdfModel::from_parts([(0, 1.0)].into_iter().collect(), 0.0, 0.0);
        assert_eq!(vectorize(Some(&m), &bag), SparseVector(vec![(0, 2.0)]));
        let pruned = BagOfWords::from_counts([(3, 4)]);
        assert!(vectorize(Some(&m), &pruned).is_empty());
        assert_eq!(vectorize(None, &pruned), SparseVector(vec![(3, 4.0)]));
    }

    #[test]
    fn tfidf_table_three_docs_five_terms() {
        // Hand-built table:
        //   d0: a a b c     d1: a d     d2: b e e e
        //   df: a=2 b=2 c=1 d=1 e=1 ; N=3
        let docs = [toks(&["a", "a", "b", "c"]), toks(&["a", "d"]), toks(&["b", "e", "e", "e"])];
        let v = build_vocabulary(&docs).unwrap();
        let m = TfIdfModel::fit(&v, 0.0, 0.0).unwrap();
        let ln = |x: f64| libm::log(x);
        let expected = [
            vec![(0, 2.0 * ln(1.5)), (1, ln(1.5)), (2, ln(3.0))],
            vec![(0, ln(1.5)), (3, ln(3.0))],
            vec![(1, ln(1.5)), (4, 3.0 * ln(3.0))],
        ];
        for (doc, want) in docs.iter().zip(expected) {
            assert_eq!(vectorize(Some(&m), &v.bag(doc)), SparseVector(want));
        }
    }

    #[test]
    fn corpus_rejects_duplicate_ids() {
        let pre = Preprocessor::default();
        let docs = [(DocumentId::from("d"), "goal"), (DocumentId::from("d"), "priest")];
        assert!(matches!(Corpus::from_texts(docs, &pre), Err(TextError::DuplicateDocument(_))));
    }
}
