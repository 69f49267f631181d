//! Gold preference records, annotator agreement statistics and ppref
//! evaluation of methods by agreement bucket.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ensemble::Cell;
use crate::store::{EntityId, PropertyId};

/// Opinions collected per record.
pub const VOTES_PER_RECORD: u32 = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GoldError {
    #[error("votes {a}+{b} do not sum to {VOTES_PER_RECORD}")]
    VoteSum { a: u32, b: u32 },
    #[error("no records")]
    Empty,
    #[error("need at least {needed} records, got {got}")]
    TooFewRecords { needed: usize, got: usize },
    #[error("no records in bucket {0}")]
    EmptyBucket(Bucket),
    #[error("{judgments} judgments for {records} records")]
    LengthMismatch { judgments: usize, records: usize },
    #[error("degenerate category distribution")]
    DegenerateCategories,
    #[error("rows must have the same positive number of raters")]
    UnevenRaters,
    #[error("vote count must be between 1 and 62, got {0}")]
    InvalidVoteCount(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "UPPERCASE"))]
pub enum Preferred {
    A,
    B,
    None,
}

impl Preferred {
    /// Whether a method verdict on (A, B) matches this preference.
    pub fn matches(self, cell: Cell) -> bool {
        matches!((self, cell), (Preferred::A, Cell::First) | (Preferred::B, Cell::Second))
    }

    pub fn as_cell(self) -> Cell {
        match self {
            Preferred::A => Cell::First,
            Preferred::B => Cell::Second,
            Preferred::None => Cell::Tie,
        }
    }
}

/// One crowdsourced comparison of two properties of a person.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldRecord {
    pub entity_label: String,
    pub entity_description: String,
    pub prop_a: String,
    pub prop_b: String,
    pub entity_id: Option<EntityId>,
    pub prop_a_id: Option<PropertyId>,
    pub prop_b_id: Option<PropertyId>,
    votes_a: u32,
    votes_b: u32,
}

impl GoldRecord {
    pub fn new(
        entity_label: impl Into<String>,
        entity_description: impl Into<String>,
        prop_a: impl Into<String>,
        prop_b: impl Into<String>,
        votes_a: u32,
        votes_b: u32,
    ) -> Result<Self, GoldError> {
        if votes_a.checked_add(votes_b) != Some(VOTES_PER_RECORD) {
            return Err(GoldError::VoteSum { a: votes_a, b: votes_b });
        }
        Ok(Self {
            entity_label: entity_label.into(),
            entity_description: entity_description.into(),
            prop_a: prop_a.into(),
            prop_b: prop_b.into(),
            entity_id: None,
            prop_a_id: None,
            prop_b_id: None,
            votes_a,
            votes_b,
        })
    }

    pub fn with_ids(mut self, entity: Option<EntityId>, a: Option<PropertyId>, b: Option<PropertyId>) -> Self {
        self.entity_id = entity;
        self.prop_a_id = a;
        self.prop_b_id = b;
        self
    }

    pub fn votes_a(&self) -> u32 {
        self.votes_a
    }

    pub fn votes_b(&self) -> u32 {
        self.votes_b
    }

    /// Size of the larger camp.
    pub fn majority_votes(&self) -> u32 {
        self.votes_a.max(self.votes_b)
    }

    pub fn agreement(&self) -> f64 {
        self.majority_votes() as f64 / VOTES_PER_RECORD as f64
    }

    pub fn preferred(&self) -> Preferred {
        match self.votes_a.cmp(&self.votes_b) {
            core::cmp::Ordering::Greater => Preferred::A,
            core::cmp::Ordering::Less => Preferred::B,
            core::cmp::Ordering::Equal => Preferred::None,
        }
    }
}

/// Record counts per agreement level, keyed by majority size (5..=10).
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementHistogram {
    pub counts: BTreeMap<u32, usize>,
    pub total: usize,
    pub mean: f64,
}

impl AgreementHistogram {
    pub fn count(&self, majority: u32) -> usize {
        self.counts.get(&majority).copied().unwrap_or(0)
    }

    pub fn share(&self, majority: u32) -> f64 {
        self.count(majority) as f64 / self.total as f64
    }
}

pub fn agreement_distribution(records: &[GoldRecord]) -> Result<AgreementHistogram, GoldError> {
    if records.is_empty() {
        return Err(GoldError::Empty);
    }
    let mut counts: BTreeMap<u32, usize> = (VOTES_PER_RECORD.div_ceil(2)..=VOTES_PER_RECORD).map(|m| (m, 0)).collect();
    let mut sum = 0u64;
    for r in records {
        *counts.entry(r.majority_votes()).or_default() += 1;
        sum += u64::from(r.majority_votes());
    }
    let mean = sum as f64 / (records.len() as f64 * VOTES_PER_RECORD as f64);
    Ok(AgreementHistogram { counts, total: records.len(), mean })
}

/// Agreement levels under annotators who each flip a fair coin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomAgreementModel {
    n_votes: u32,
    /// Majority size and the numerator of its probability over `2^n_votes`.
    numerators: BTreeMap<u32, u64>,
}

impl RandomAgreementModel {
    pub fn new(n_votes: u32) -> Result<Self, GoldError> {
        if n_votes == 0 || n_votes > 62 {
            return Err(GoldError::InvalidVoteCount(n_votes));
        }
        let mut numerators = BTreeMap::new();
        for m in n_votes.div_ceil(2)..=n_votes {
            let c = binomial(n_votes, m);
            // Either camp can hold the majority, except at an exact split.
            let ways = if 2 * m == n_votes { c } else { 2 * c };
            numerators.insert(m, ways);
        }
        Ok(Self { n_votes, numerators })
    }

    pub fn n_votes(&self) -> u32 {
        self.n_votes
    }

    pub fn denominator(&self) -> u64 {
        1u64 << self.n_votes
    }

    pub fn numerator(&self, majority: u32) -> u64 {
        self.numerators.get(&majority).copied().unwrap_or(0)
    }

    pub fn probability(&self, majority: u32) -> f64 {
        self.numerator(majority) as f64 / self.denominator() as f64
    }

    pub fn numerator_at_least(&self, majority: u32) -> u64 {
        self.numerators.range(majority..).map(|(_, n)| n).sum()
    }

    pub fn probability_at_least(&self, majority: u32) -> f64 {
        self.numerator_at_least(majority) as f64 / self.denominator() as f64
    }

    pub fn levels(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.numerators.keys().map(|&m| (m, self.probability(m)))
    }
}

fn binomial(n: u32, k: u32) -> u64 {
    let k = k.min(n - k);
    let mut c = 1u64;
    for i in 0..k {
        c = c * u64::from(n - i) / u64::from(i + 1);
    }
    c
}

/// Monte Carlo frequencies of each majority size under fair-coin annotators.
pub fn simulate_random_agreement(n_votes: u32, trials: usize, seed: u64) -> BTreeMap<u32, f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for _ in 0..trials {
        let a = (0..n_votes).filter(|_| rng.random::<bool>()).count() as u32;
        *counts.entry(a.max(n_votes - a)).or_default() += 1;
    }
    counts.into_iter().map(|(m, c)| (m, c as f64 / trials as f64)).collect()
}

/// Fleiss' kappa over a subjects-by-categories count table with a constant
/// number of raters per subject.
pub fn fleiss_kappa_table(rows: &[Vec<u32>]) -> Result<f64, GoldError> {
    if rows.len() < 2 {
        return Err(GoldError::TooFewRecords { needed: 2, got: rows.len() });
    }
    let raters: u32 = rows[0].iter().sum();
    let categories = rows[0].len();
    if raters < 2 || rows.iter().any(|r| r.len() != categories || r.iter().sum::<u32>() != raters) {
        return Err(GoldError::UnevenRaters);
    }
    let n = raters as f64;
    let subjects = rows.len() as f64;
    let mut totals = vec![0.0; categories];
    let mut p_bar = 0.0;
    for r in rows {
        let sq: f64 = r.iter().map(|&c| (c as f64) * (c as f64)).sum();
        p_bar += (sq - n) / (n * (n - 1.0));
        for (t, &c) in totals.iter_mut().zip(r) {
            *t += c as f64;
        }
    }
    p_bar /= subjects;
    let p_e: f64 = totals.iter().map(|t| (t / (subjects * n)) * (t / (subjects * n))).sum();
    if 1.0 - p_e <= 1e-12 {
        return Err(GoldError::DegenerateCategories);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

/// Fleiss' kappa with the two properties of each record as categories.
pub fn fleiss_kappa(records: &[GoldRecord]) -> Result<f64, GoldError> {
    let rows: Vec<Vec<u32>> = records.iter().map(|r| vec![r.votes_a, r.votes_b]).collect();
    fleiss_kappa_table(&rows)
}

/// Agreement buckets. Records split 5/5 belong to none of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Bucket {
    AtLeast70,
    AtLeast80,
    AtLeast90,
    Unanimous,
}

impl Bucket {
    pub const ALL: [Bucket; 4] = [Bucket::AtLeast70, Bucket::AtLeast80, Bucket::AtLeast90, Bucket::Unanimous];

    /// Smallest majority size admitted.
    pub fn min_majority(self) -> u32 {
        match self {
            Bucket::AtLeast70 => 7,
            Bucket::AtLeast80 => 8,
            Bucket::AtLeast90 => 9,
            Bucket::Unanimous => 10,
        }
    }

    pub fn contains(self, r: &GoldRecord) -> bool {
        r.majority_votes() >= self.min_majority()
    }

    pub fn label(self) -> &'static str {
        match self {
            Bucket::AtLeast70 => ">=70%",
            Bucket::AtLeast80 => ">=80%",
            Bucket::AtLeast90 => ">=90%",
            Bucket::Unanimous => "100%",
        }
    }
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PprefCell {
    pub n: usize,
    pub correct: usize,
    /// Included in the denominator as misses.
    pub ties: usize,
    /// Included in the denominator as misses.
    pub abstentions: usize,
    pub value: f64,
}

/// Share of bucket records where the method picks the annotators' majority.
pub fn ppref(judgments: &[Cell], records: &[GoldRecord], bucket: Bucket) -> Result<PprefCell, GoldError> {
    if judgments.len() != records.len() {
        return Err(GoldError::LengthMismatch { judgments: judgments.len(), records: records.len() });
    }
    let mut cell = PprefCell { n: 0, correct: 0, ties: 0, abstentions: 0, value: 0.0 };
    for (j, r) in judgments.iter().zip(records) {
        if !bucket.contains(r) {
            continue;
        }
        cell.n += 1;
        match j {
            Cell::Tie => cell.ties += 1,
            Cell::Abstain => cell.abstentions += 1,
            _ if r.preferred().matches(*j) => cell.correct += 1,
            _ => {}
        }
    }
    if cell.n == 0 {
        return Err(GoldError::EmptyBucket(bucket));
    }
    cell.value = cell.correct as f64 / cell.n as f64;
    Ok(cell)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BucketSummary {
    pub bucket: Bucket,
    pub n: usize,
    /// Mean agreement of the bucket's records: how often a single annotator
    /// sides with the majority.
    pub annotator_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodRow {
    pub method: String,
    pub cells: Vec<Result<PprefCell, GoldError>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub buckets: Vec<BucketSummary>,
    pub methods: Vec<MethodRow>,
}

impl EvalReport {
    /// Expected ppref of a method that picks uniformly at random.
    pub const RANDOM_REFERENCE: f64 = 0.5;

    pub fn method(&self, name: &str) -> Option<&MethodRow> {
        self.methods.iter().find(|m| m.method == name)
    }
}

pub fn bucket_summaries(records: &[GoldRecord]) -> Vec<BucketSummary> {
    Bucket::ALL
        .iter()
        .map(|&bucket| {
            let inside: Vec<&GoldRecord> = records.iter().filter(|r| bucket.contains(r)).collect();
            let annotator_mean = if inside.is_empty() {
                None
            } else {
                Some(inside.iter().map(|r| r.agreement()).sum::<f64>() / inside.len() as f64)
            };
            BucketSummary { bucket, n: inside.len(), annotator_mean }
        })
        .collect()
}

pub fn evaluate(methods: &[(String, Vec<Cell>)], records: &[GoldRecord]) -> Result<EvalReport, GoldError> {
    if records.is_empty() {
        return Err(GoldError::Empty);
    }
    let mut rows = Vec::with_capacity(methods.len());
    for (name, judgments) in methods {
        if judgments.len() != records.len() {
            return Err(GoldError::LengthMismatch { judgments: judgments.len(), records: records.len() });
        }
        let cells = Bucket::ALL.iter().map(|&b| ppref(judgments, records, b)).collect();
        rows.push(MethodRow { method: name.clone(), cells });
    }
    Ok(EvalReport { buckets: bucket_summaries(records), methods: rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(a: u32, b: u32) -> GoldRecord {
        GoldRecord::new("x", "", "a", "b", a, b).unwrap()
    }

    #[test]
    fn table_rows() {
        let johnson = GoldRecord::new("Albert Johnson", "", "military conflict", "drafted by", 0, 10).unwrap();
        assert_eq!(johnson.preferred(), Preferred::B);
        assert_eq!(johnson.agreement(), 1.0);
        let split = rec(5, 5);
        assert_eq!(split.preferred(), Preferred::None);
        assert_eq!(split.agreement(), 0.5);
        assert_eq!(GoldRecord::new("x", "", "a", "b", 7, 4), Err(GoldError::VoteSum { a: 7, b: 4 }));
    }

    #[test]
    fn random_model_exact() {
        let m = RandomAgreementModel::new(10).unwrap();
        assert_eq!(m.numerator(10), 2);
        assert_eq!(m.numerator_at_least(8), 112);
        assert_eq!(m.numerator(5), 252);
        assert_eq!(m.numerator_at_least(5), 1024);
        assert!(RandomAgreementModel::new(0).is_err());
        let odd = RandomAgreementModel::new(3).unwrap();
        assert_eq!(odd.numerator_at_least(0), 8);
    }

    #[test]
    fn kappa_extremes() {
        assert_eq!(fleiss_kappa(&[rec(10, 0), rec(0, 10)]).unwrap(), 1.0);
        assert_eq!(fleiss_kappa(&[rec(10, 0), rec(10, 0)]), Err(GoldError::DegenerateCategories));
        assert!(fleiss_kappa(&[rec(10, 0)]).is_err());
    }

    #[test]
    fn ppref_hand_count() {
        // 5 records at >= 80%: method matches 3
        let records = [rec(8, 2), rec(9, 1), rec(2, 8), rec(10, 0), rec(0, 10), rec(6, 4)];
        let j = [Cell::First, Cell::Second, Cell::Second, Cell::Tie, Cell::Second, Cell::First];
        let c = ppref(&j, &records, Bucket::AtLeast80).unwrap();
        assert_eq!((c.n, c.correct, c.ties, c.abstentions), (5, 3, 1, 0));
        assert!((c.value - 0.6).abs() < 1e-15);
        assert_eq!(ppref(&j[..1], &records[..1], Bucket::Unanimous), Err(GoldError::EmptyBucket(Bucket::Unanimous)));
    }

    #[test]
    fn split_records_are_in_no_bucket() {
        let r = rec(5, 5);
        assert!(Bucket::ALL.iter().all(|b| !b.contains(&r)));
    }
}
