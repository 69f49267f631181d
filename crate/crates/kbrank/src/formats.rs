//! Line-delimited JSON inputs and small file helpers.

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use kbrank_core::baselines::FixtureProvider;
use kbrank_core::text::{DocumentId, StopList};
use kbrank_core::{EntityRecord, PropertyDef};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
}

impl FormatError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        FormatError::Io { path: path.to_path_buf(), source }
    }
}

/// Reads one JSON value per non-blank line.
pub fn read_ndjson<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, FormatError> {
    let file = fs::File::open(path).map_err(|e| FormatError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| FormatError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| FormatError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn read_entities(path: &Path) -> Result<Vec<EntityRecord>, FormatError> {
    read_ndjson(path)
}

pub fn read_properties(path: &Path) -> Result<Vec<PropertyDef>, FormatError> {
    read_ndjson(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Article {
    pub id: DocumentId,
    pub text: String,
}

pub fn read_articles(path: &Path) -> Result<Vec<Article>, FormatError> {
    read_ndjson(path)
}

/// A recorded search engine hit count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchCountLine {
    pub query: String,
    pub count: u64,
}

pub fn read_search_counts(path: &Path) -> Result<FixtureProvider, FormatError> {
    let lines: Vec<SearchCountLine> = read_ndjson(path)?;
    Ok(FixtureProvider::new(lines.into_iter().map(|l| (l.query, l.count))))
}

/// One stop word per line; `#` starts a comment.
pub fn read_stoplist(path: &Path) -> Result<StopList, FormatError> {
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    Ok(StopList::parse(&text))
}

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Incremental fingerprint over several labelled parts.
#[derive(Default, Clone)]
pub struct Fingerprint(Sha256);

impl Fingerprint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn part(mut self, label: &str, bytes: &[u8]) -> Self {
        self.0.update((label.len() as u64).to_le_bytes());
        self.0.update(label.as_bytes());
        self.0.update((bytes.len() as u64).to_le_bytes());
        self.0.update(bytes);
        self
    }

    pub fn file(self, label: &str, path: &Path) -> Result<Self, FormatError> {
        let bytes = fs::read(path).map_err(|e| FormatError::io(path, e))?;
        Ok(self.part(label, &bytes))
    }

    pub fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}
