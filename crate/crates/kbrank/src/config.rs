//! Run configuration, read from a TOML file.
//!
//! ```toml
//! [paths]
//! entities = "entities.ndjson"
//! properties = "properties.ndjson"
//! corpus = "corpus.ndjson"
//! gold = "gold.csv"
//! search_counts = "search_counts.ndjson"
//! cache_dir = "cache"
//! output_dir = "out"
//!
//! [tfidf]
//! prune_low = 0.2
//! prune_high = 0.2
//!
//! [lsi]
//! k = 50
//! seed = 0
//!
//! [[ensembles]]
//! name = "best5"
//! members = ["search_count", "lsi", "lda", "occupation_frequency", "regression_tfidf"]
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use kbrank_core::ensemble::{best_paper_ensemble, EnsembleSpec};
use kbrank_core::pivot::{LogisticParams, PivotConfig};
use kbrank_core::semantic::{LdaConfig, SvdOptions, DEFAULT_LSI_TOPICS};
use kbrank_core::IngestFilter;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formats::sha256_hex;

/// Overrides the configured cache directory.
pub const CACHE_DIR_ENV: &str = "KBRANK_CACHE_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("configuration needs paths.{0}")]
    MissingPath(&'static str),
    #[error("{}: {what} file not found", path.display())]
    NotFound { what: &'static str, path: PathBuf },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub entities: Option<PathBuf>,
    pub properties: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub search_counts: Option<PathBuf>,
    /// Recorded method outputs, replayed by `recorded:<method>`.
    pub recorded: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TfIdfConfig {
    pub prune_low: f64,
    pub prune_high: f64,
}

impl Default for TfIdfConfig {
    fn default() -> Self {
        Self { prune_low: 0.2, prune_high: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LsiConfig {
    pub k: usize,
    pub oversample: usize,
    pub max_power_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LsiConfig {
    fn default() -> Self {
        let s = SvdOptions::default();
        Self {
            k: DEFAULT_LSI_TOPICS,
            oversample: s.oversample,
            max_power_iterations: s.max_power_iterations,
            tolerance: s.tolerance,
            seed: s.seed,
        }
    }
}

impl LsiConfig {
    pub fn solver(&self) -> SvdOptions {
        SvdOptions {
            oversample: self.oversample,
            max_power_iterations: self.max_power_iterations,
            tolerance: self.tolerance,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub methods: Vec<String>,
    /// Seed of the `random` method.
    pub random_seed: u64,
    /// Records below this agreement are left out of correlations.
    pub min_agreement: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            methods: ["human_frequency", "occupation_frequency", "search_count", "property_suggester"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            random_seed: 0,
            min_agreement: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub ingest: IngestFilter,
    pub tfidf: TfIdfConfig,
    pub pivot: PivotConfig,
    pub regression: LogisticParams,
    pub lsi: LsiConfig,
    pub lda: LdaConfig,
    pub evaluation: EvaluationConfig,
    pub ensembles: Vec<EnsembleSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            ingest: IngestFilter::default(),
            tfidf: TfIdfConfig::default(),
            pivot: PivotConfig::default(),
            regression: LogisticParams::default(),
            lsi: LsiConfig::default(),
            lda: LdaConfig::default(),
            evaluation: EvaluationConfig::default(),
            ensembles: vec![best_paper_ensemble()],
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, String> {
        let mut config: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        config.paths.resolve(base);
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|message| ConfigError::Parse { path: path.to_path_buf(), message })
    }

    /// Hash of the effective configuration, after path resolution and overrides.
    pub fn hash(&self) -> String {
        sha256_hex(toml::to_string(self).expect("config serializes").as_bytes())
    }

    pub fn ensemble(&self, name: &str) -> Option<&EnsembleSpec> {
        self.ensembles.iter().find(|e| e.name() == name)
    }

    /// The cache directory: the environment override, else the configured
    /// one, else `.kbrank-cache` in the working directory.
    pub fn cache_dir(&self) -> PathBuf {
        if let Some(dir) = std::env::var_os(CACHE_DIR_ENV).filter(|v| !v.is_empty()) {
            return PathBuf::from(dir);
        }
        self.paths.cache_dir.clone().unwrap_or_else(|| PathBuf::from(".kbrank-cache"))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.paths.output_dir.clone().unwrap_or_else(|| PathBuf::from("kbrank-out"))
    }

    /// An existing input file.
    pub fn input(&self, what: &'static str, path: &Option<PathBuf>) -> Result<PathBuf, ConfigError> {
        let path = path.clone().ok_or(ConfigError::MissingPath(what))?;
        if !path.is_file() {
            return Err(ConfigError::NotFound { what, path });
        }
        Ok(path)
    }
}

impl Paths {
    fn resolve(&mut self, base: &Path) {
        for p in [
            &mut self.entities,
            &mut self.properties,
            &mut self.corpus,
            &mut self.stopwords,
            &mut self.gold,
            &mut self.search_counts,
            &mut self.recorded,
            &mut self.cache_dir,
            &mut self.output_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_relative_paths() {
        let c = RunConfig::from_toml("[paths]\nentities = \"e.ndjson\"\ngold = \"/abs/g.csv\"\n", Path::new("/data")).unwrap();
        assert_eq!(c.paths.entities.as_deref(), Some(Path::new("/data/e.ndjson")));
        assert_eq!(c.paths.gold.as_deref(), Some(Path::new("/abs/g.csv")));
        assert_eq!(c.tfidf.prune_low, 0.2);
        assert_eq!(c.lsi.k, 50);
        assert_eq!(c.lda.k, 20);
        assert_eq!(c.ensembles, vec![best_paper_ensemble()]);
    }

    #[test]
    fn ensembles_are_validated() {
        let bad = "[[ensembles]]\nname = \"x\"\nmembers = [\"a\", \"b\"]\n";
        assert!(RunConfig::from_toml(bad, Path::new(".")).is_err());
        let dup = "[[ensembles]]\nname = \"x\"\nmembers = [\"a\", \"b\", \"a\"]\n";
        assert!(RunConfig::from_toml(dup, Path::new(".")).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("[lsi]\nkk = 3\n", Path::new(".")).is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let c = RunConfig::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_toml(&text, Path::new("/")).unwrap(), c);
    }
}
