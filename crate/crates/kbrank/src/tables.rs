//! Gold CSV and judgment-matrix TSV files.

use std::io::{Read, Write};
use std::path::Path;

use kbrank_core::ensemble::{Cell, JudgmentMatrix};
use kbrank_core::gold::GoldRecord;
use kbrank_core::{EntityId, PropertyId};
use serde::Deserialize;
use thiserror::Error;

use crate::formats::{write_atomic, FormatError};

#[derive(Debug, Error)]
pub enum TableError {
    #[error(transparent)]
    File(#[from] FormatError),
    #[error("{}:{line}: {message}", path.display())]
    Row { path: std::path::PathBuf, line: u64, message: String },
}

/// A rejected row, with its 1-based line number.
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Deserialize)]
struct GoldRow {
    entity_label: String,
    entity_description: String,
    prop_a: String,
    prop_b: String,
    votes_a: u32,
    votes_b: u32,
    #[serde(default)]
    entity_id: Option<String>,
    #[serde(default)]
    prop_a_id: Option<String>,
    #[serde(default)]
    prop_b_id: Option<String>,
}

fn optional_id<T>(raw: Option<String>, make: impl Fn(String) -> Result<T, kbrank_core::store::StoreError>) -> Result<Option<T>, String> {
    match raw.map(|s| s.trim().to_string()).filter(|s| !s.is_empty()) {
        Some(s) => make(s).map(Some).map_err(|e| e.to_string()),
        None => Ok(None),
    }
}

impl GoldRow {
    fn into_record(self) -> Result<GoldRecord, String> {
        let entity = optional_id(self.entity_id, EntityId::new)?;
        let a = optional_id(self.prop_a_id, PropertyId::new)?;
        let b = optional_id(self.prop_b_id, PropertyId::new)?;
        let record = GoldRecord::new(self.entity_label, self.entity_description, self.prop_a, self.prop_b, self.votes_a, self.votes_b)
            .map_err(|e| e.to_string())?;
        Ok(record.with_ids(entity, a, b))
    }
}

/// Parses gold CSV, one result per data row.
///
/// Columns: `entity_label, entity_description, prop_a, prop_b, votes_a,
/// votes_b`, optionally followed by `entity_id, prop_a_id, prop_b_id`.
pub fn parse_gold<R: Read>(reader: R) -> Vec<Result<GoldRecord, RowError>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) => return vec![Err(RowError { line: 1, message: e.to_string() })],
    };
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let fallback = i as u64 + 2;
        let result = match row {
            Ok(r) => {
                let line = r.position().map(|p| p.line()).unwrap_or(fallback);
                r.deserialize::<GoldRow>(Some(&headers))
                    .map_err(|e| e.to_string())
                    .and_then(GoldRow::into_record)
                    .map_err(|message| RowError { line, message })
            }
            Err(e) => Err(RowError { line: e.position().map(|p| p.line()).unwrap_or(fallback), message: e.to_string() }),
        };
        out.push(result);
    }
    out
}

/// Loads a gold CSV, failing on the first bad row.
pub fn load_gold(path: &Path) -> Result<Vec<GoldRecord>, TableError> {
    let file = std::fs::File::open(path).map_err(|e| FormatError::io(path, e))?;
    parse_gold(file)
        .into_iter()
        .map(|r| r.map_err(|e| TableError::Row { path: path.to_path_buf(), line: e.line, message: e.message }))
        .collect()
}

/// Long format: `record_id  method  judgment`, tab separated, with header.
pub fn matrix_to_tsv(m: &JudgmentMatrix) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(Vec::new());
    w.write_record(["record_id", "method", "judgment"]).expect("in-memory write");
    for (i, record) in m.records().iter().enumerate() {
        for (method, cell) in m.methods().iter().zip(m.row(i)) {
            w.write_record([record.as_str(), method.as_str(), cell.as_str()]).expect("in-memory write");
        }
    }
    w.into_inner().expect("in-memory write")
}

pub fn write_matrix(path: &Path, m: &JudgmentMatrix) -> Result<(), FormatError> {
    write_atomic(path, &matrix_to_tsv(m)).map_err(|e| FormatError::io(path, e))
}

/// Reads the long format back. Methods and records keep their order of
/// first appearance; every record needs a cell for every method.
pub fn read_matrix(path: &Path) -> Result<JudgmentMatrix, TableError> {
    let file = std::fs::File::open(path).map_err(|e| FormatError::io(path, e))?;
    parse_matrix(file).map_err(|e| TableError::Row { path: path.to_path_buf(), line: e.line, message: e.message })
}

pub fn parse_matrix<R: Read>(reader: R) -> Result<JudgmentMatrix, RowError> {
    let mut rdr = csv::ReaderBuilder::new().delimiter(b'\t').trim(csv::Trim::All).from_reader(reader);
    let mut methods: Vec<String> = Vec::new();
    let mut records: Vec<String> = Vec::new();
    let mut cells: std::collections::HashMap<(usize, usize), Cell> = std::collections::HashMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| RowError { line: e.position().map(|p| p.line()).unwrap_or(0), message: e.to_string() })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != 3 {
            return Err(RowError { line, message: format!("expected 3 fields, got {}", row.len()) });
        }
        let index = |list: &mut Vec<String>, name: &str| match list.iter().position(|x| x == name) {
            Some(i) => i,
            None => {
                list.push(name.to_string());
                list.len() - 1
            }
        };
        let r = index(&mut records, &row[0]);
        let m = index(&mut methods, &row[1]);
        let cell: Cell = row[2].parse().map_err(|e: kbrank_core::ensemble::EnsembleError| RowError { line, message: e.to_string() })?;
        if cells.insert((r, m), cell).is_some() {
            return Err(RowError { line, message: format!("duplicate cell for {} / {}", &row[0], &row[1]) });
        }
    }
    let mut out = JudgmentMatrix::new(methods.clone()).map_err(|e| RowError { line: 0, message: e.to_string() })?;
    for (r, record) in records.iter().enumerate() {
        let mut row = Vec::with_capacity(methods.len());
        for (m, method) in methods.iter().enumerate() {
            match cells.get(&(r, m)) {
                Some(c) => row.push(*c),
                None => return Err(RowError { line: 0, message: format!("no judgment of {method} for {record}") }),
            }
        }
        out.push_row(record.clone(), row).map_err(|e| RowError { line: 0, message: e.to_string() })?;
    }
    Ok(out)
}

/// Writes gold records in the loader's column layout.
pub fn write_gold<W: Write>(writer: W, records: &[GoldRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["entity_label", "entity_description", "prop_a", "prop_b", "votes_a", "votes_b"])?;
    for r in records {
        w.write_record([
            r.entity_label.as_str(),
            r.entity_description.as_str(),
            r.prop_a.as_str(),
            r.prop_b.as_str(),
            &r.votes_a().to_string(),
            &r.votes_b().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
