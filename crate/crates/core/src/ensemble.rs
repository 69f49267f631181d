//! Agreement between methods and majority-vote ensembles over them.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use crate::judge::{JudgeError, PreferenceJudge, PreferenceJudgment, Winner};
use crate::store::{EntityId, PropertyId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnsembleError {
    #[error("undefined correlation")]
    UndefinedCorrelation,
    #[error("column lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("unknown method {0:?}")]
    UnknownMethod(String),
    #[error("row for {record} has {got} cells, expected {expected}")]
    RowWidth { record: String, got: usize, expected: usize },
    #[error("duplicate method {0:?}")]
    DuplicateMethod(String),
    #[error("ensemble needs at least 3 members, got {0}")]
    TooFewMembers(usize),
    #[error("ensemble {ensemble:?} expects member {expected:?}, got {got:?}")]
    MemberMismatch { ensemble: String, expected: String, got: String },
    #[error("abstain: every member abstained")]
    AllAbstained,
    #[error("unknown judgment {0:?}")]
    UnknownCell(String),
}

/// One method's verdict on one record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "UPPERCASE"))]
pub enum Cell {
    First,
    Second,
    Tie,
    Abstain,
}

impl Cell {
    /// Any error counts as an abstention.
    pub fn from_result(r: &Result<PreferenceJudgment, JudgeError>) -> Self {
        match r {
            Ok(j) => j.winner.into(),
            Err(_) => Cell::Abstain,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Cell::First => "FIRST",
            Cell::Second => "SECOND",
            Cell::Tie => "TIE",
            Cell::Abstain => "ABSTAIN",
        }
    }

    pub fn mirrored(self) -> Self {
        match self {
            Cell::First => Cell::Second,
            Cell::Second => Cell::First,
            other => other,
        }
    }

    fn binary(self) -> Option<f64> {
        match self {
            Cell::First => Some(1.0),
            Cell::Second => Some(0.0),
            _ => None,
        }
    }
}

impl From<Winner> for Cell {
    fn from(w: Winner) -> Self {
        match w {
            Winner::First => Cell::First,
            Winner::Second => Cell::Second,
            Winner::Tie => Cell::Tie,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Cell {
    type Err = EnsembleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FIRST" => Ok(Cell::First),
            "SECOND" => Ok(Cell::Second),
            "TIE" => Ok(Cell::Tie),
            "ABSTAIN" => Ok(Cell::Abstain),
            _ => Err(EnsembleError::UnknownCell(s.to_string())),
        }
    }
}

/// Rows are gold records, columns are named methods.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JudgmentMatrix {
    methods: Vec<String>,
    records: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl JudgmentMatrix {
    pub fn new(methods: Vec<String>) -> Result<Self, EnsembleError> {
        let mut seen = BTreeSet::new();
        for m in &methods {
            if !seen.insert(m.as_str()) {
                return Err(EnsembleError::DuplicateMethod(m.clone()));
            }
        }
        Ok(Self { methods, records: Vec::new(), rows: Vec::new() })
    }

    pub fn push_row(&mut self, record: impl Into<String>, cells: Vec<Cell>) -> Result<(), EnsembleError> {
        let record = record.into();
        if cells.len() != self.methods.len() {
            return Err(EnsembleError::RowWidth { record, got: cells.len(), expected: self.methods.len() });
        }
        self.records.push(record);
        self.rows.push(cells);
        Ok(())
    }

    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    pub fn records(&self) -> &[String] {
        &self.records
    }

    pub fn row(&self, i: usize) -> &[Cell] {
        &self.rows[i]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, method: &str) -> Result<usize, EnsembleError> {
        self.methods.iter().position(|m| m == method).ok_or_else(|| EnsembleError::UnknownMethod(method.to_string()))
    }

    pub fn column(&self, method: &str) -> Result<Vec<Cell>, EnsembleError> {
        let j = self.column_index(method)?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Keeps the rows for which `keep(row_index)` holds.
    pub fn filter_rows(&self, mut keep: impl FnMut(usize) -> bool) -> Self {
        let mut out = Self { methods: self.methods.clone(), records: Vec::new(), rows: Vec::new() };
        for i in 0..self.rows.len() {
            if keep(i) {
                out.records.push(self.records[i].clone());
                out.rows.push(self.rows[i].clone());
            }
        }
        out
    }
}

/// Sample Pearson coefficient with FIRST as 1 and SECOND as 0, over rows
/// where both cells are binary.
pub fn pearson(a: &[Cell], b: &[Cell]) -> Result<f64, EnsembleError> {
    if a.len() != b.len() {
        return Err(EnsembleError::LengthMismatch(a.len(), b.len()));
    }
    let pairs: Vec<(f64, f64)> = a.iter().zip(b).filter_map(|(x, y)| Some((x.binary()?, y.binary()?))).collect();
    if pairs.len() < 2 {
        return Err(EnsembleError::UndefinedCorrelation);
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in &pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EnsembleError::UndefinedCorrelation);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Symmetric table of pairwise coefficients. Diagonal and undefined cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub methods: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.methods.iter().position(|m| m == a)?;
        let j = self.methods.iter().position(|m| m == b)?;
        self.values[i][j]
    }
}

pub fn correlation_matrix(m: &JudgmentMatrix) -> CorrelationMatrix {
    let k = m.methods.len();
    let columns: Vec<Vec<Cell>> = (0..k).map(|j| m.rows.iter().map(|r| r[j]).collect()).collect();
    let mut values = alloc::vec![alloc::vec![None; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let r = pearson(&columns[i], &columns[j]).ok();
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    CorrelationMatrix { methods: m.methods.clone(), values }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum TieBreak {
    /// Equal vote counts produce a tie.
    #[default]
    Tie,
    /// Equal vote counts defer to the first member, if it voted.
    FallbackToFirstMember,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(try_from = "RawSpec"))]
pub struct EnsembleSpec {
    name: String,
    members: Vec<String>,
    #[cfg_attr(feature = "serde", serde(default))]
    tie_break: TieBreak,
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
struct RawSpec {
    name: String,
    members: Vec<String>,
    #[serde(default)]
    tie_break: TieBreak,
}

#[cfg(feature = "serde")]
impl TryFrom<RawSpec> for EnsembleSpec {
    type Error = EnsembleError;

    fn try_from(raw: RawSpec) -> Result<Self, Self::Error> {
        EnsembleSpec::new(raw.name, raw.members, raw.tie_break)
    }
}

impl EnsembleSpec {
    pub fn new(name: impl Into<String>, members: Vec<String>, tie_break: TieBreak) -> Result<Self, EnsembleError> {
        if members.len() < 3 {
            return Err(EnsembleError::TooFewMembers(members.len()));
        }
        let mut seen = BTreeSet::new();
        for m in &members {
            if !seen.insert(m.as_str()) {
                return Err(EnsembleError::DuplicateMethod(m.clone()));
            }
        }
        Ok(Self { name: name.into(), members, tie_break })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn members(&self) -> &[String] {
        &self.members
    }

    pub fn tie_break(&self) -> TieBreak {
        self.tie_break
    }
}

/// Search counts, LSI, LDA, occupation frequency and TF-IDF regression.
pub fn best_paper_ensemble() -> EnsembleSpec {
    let members = ["search_count", "lsi", "lda", "occupation_frequency", "regression_tfidf"];
    EnsembleSpec::new("best5", members.iter().map(|m| m.to_string()).collect(), TieBreak::Tie)
        .expect("constant spec is valid")
}

/// Strict majority of FIRST against SECOND votes; ties and abstentions do not vote.
/// The scores of the returned judgment are the two vote counts.
pub fn majority_judge(spec: &EnsembleSpec, votes: &[Cell]) -> Result<PreferenceJudgment, EnsembleError> {
    if votes.len() != spec.members.len() {
        return Err(EnsembleError::LengthMismatch(votes.len(), spec.members.len()));
    }
    if votes.iter().all(|v| *v == Cell::Abstain) {
        return Err(EnsembleError::AllAbstained);
    }
    let first = votes.iter().filter(|v| **v == Cell::First).count() as f64;
    let second = votes.iter().filter(|v| **v == Cell::Second).count() as f64;
    let mut j = PreferenceJudgment::from_scores(first, second);
    if j.winner == Winner::Tie && spec.tie_break == TieBreak::FallbackToFirstMember {
        j.winner = match votes[0] {
            Cell::First => Winner::First,
            Cell::Second => Winner::Second,
            _ => Winner::Tie,
        };
    }
    Ok(j)
}

/// Majority vote over live member judges.
pub struct EnsembleJudge<J> {
    spec: EnsembleSpec,
    members: Vec<J>,
}

impl<J: PreferenceJudge> EnsembleJudge<J> {
    /// `members` must line up with the spec's member names.
    pub fn new(spec: EnsembleSpec, members: Vec<J>) -> Result<Self, EnsembleError> {
        if members.len() != spec.members.len() {
            return Err(EnsembleError::LengthMismatch(members.len(), spec.members.len()));
        }
        for (expected, judge) in spec.members.iter().zip(&members) {
            if judge.name() != expected {
                return Err(EnsembleError::MemberMismatch {
                    ensemble: spec.name.clone(),
                    expected: expected.clone(),
                    got: judge.name().to_string(),
                });
            }
        }
        Ok(Self { spec, members })
    }

    pub fn spec(&self) -> &EnsembleSpec {
        &self.spec
    }
}

impl<J: PreferenceJudge> PreferenceJudge for EnsembleJudge<J> {
    fn name(&self) -> &str {
        &self.spec.name
    }

    fn judge(&self, e: &EntityId, p: &PropertyId, q: &PropertyId) -> Result<PreferenceJudgment, JudgeError> {
        let mut votes = Vec::with_capacity(self.members.len());
        for m in &self.members {
            let r = m.judge(e, p, q);
            if let Err(JudgeError::Store(err)) = r {
                return Err(err.into());
            }
            votes.push(Cell::from_result(&r));
        }
        majority_judge(&self.spec, &votes).map_err(|err| JudgeError::Abstain(err.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use Cell::*;

    fn spec5() -> EnsembleSpec {
        best_paper_ensemble()
    }

    #[test]
    fn pearson_extremes() {
        let a = [First, Second, First, Second];
        let b = [Second, First, Second, First];
        assert!((pearson(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&a, &b).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&[First, First], &[First, Second]), Err(EnsembleError::UndefinedCorrelation));
        // ties and abstentions drop the row
        assert!((pearson(&[First, Tie, Second], &[First, First, Second]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn majority_examples() {
        assert_eq!(majority_judge(&spec5(), &[First, First, Second, First, Second]).unwrap().winner, Winner::First);
        let three = EnsembleSpec::new("t", vec!["a".into(), "b".into(), "c".into()], TieBreak::Tie).unwrap();
        assert_eq!(majority_judge(&three, &[First, Second, Tie]).unwrap().winner, Winner::Tie);
        assert_eq!(majority_judge(&three, &[Abstain, Abstain, Abstain]), Err(EnsembleError::AllAbstained));
        let fallback = EnsembleSpec::new("t", vec!["a".into(), "b".into(), "c".into()], TieBreak::FallbackToFirstMember).unwrap();
        assert_eq!(majority_judge(&fallback, &[Second, First, Abstain]).unwrap().winner, Winner::Second);
    }

    #[test]
    fn spec_validation() {
        assert_eq!(EnsembleSpec::new("x", vec!["a".into(), "b".into()], TieBreak::Tie), Err(EnsembleError::TooFewMembers(2)));
        assert!(matches!(
            EnsembleSpec::new("x", vec!["a".into(), "b".into(), "a".into()], TieBreak::Tie),
            Err(EnsembleError::DuplicateMethod(_))
        ));
        let s = best_paper_ensemble();
        assert_eq!(s.members().len(), 5);
    }

    #[test]
    fn matrix_is_symmetric_with_empty_diagonal() {
        let mut m = JudgmentMatrix::new(vec!["a".into(), "b".into(), "c".into()]).unwrap();
        m.push_row("r1", vec![First, First, Second]).unwrap();
        m.push_row("r2", vec![Second, Second, First]).unwrap();
        m.push_row("r3", vec![First, Second, First]).unwrap();
        assert!(m.push_row("r4", vec![First]).is_err());
        let c = correlation_matrix(&m);
        for i in 0..3 {
            assert_eq!(c.values[i][i], None);
            for j in 0..3 {
                assert_eq!(c.values[i][j], c.values[j][i]);
            }
        }
    }

    #[test]
    fn cell_parsing() {
        assert_eq!("first".parse::<Cell>().unwrap(), First);
        assert_eq!(Abstain.to_string(), "ABSTAIN");
        assert!("maybe".parse::<Cell>().is_err());
    }
}
