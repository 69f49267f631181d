//! Evaluation and correlation reports as TSV and JSON, plus run manifests.

use std::path::{Path, PathBuf};
use std::time::Instant;

use kbrank_core::ensemble::CorrelationMatrix;
use kbrank_core::gold::{Bucket, BucketSummary, EvalReport, PprefCell};
use serde::Serialize;

use crate::formats::{sha256_hex, write_atomic, FormatError};

/// An evaluation run: the ppref table plus what could not be evaluated.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvalReport,
    /// Methods that could not be built, with the reason.
    pub failures: Vec<(String, String)>,
    pub records: usize,
    /// Records whose entity or properties are missing from the store.
    pub unresolved: usize,
}

fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

impl Evaluation {
    /// Rows are methods, columns agreement buckets, values ppref in percent.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("method");
        for b in Bucket::ALL {
            out.push('\t');
            out.push_str(b.label());
        }
        out.push_str("\tties\tabstentions\n");
        out.push_str("n");
        for s in &self.report.buckets {
            out.push_str(&format!("\t{}", s.n));
        }
        out.push_str("\t\t\n");
        out.push_str("annotators");
        for s in &self.report.buckets {
            out.push('\t');
            out.push_str(&s.annotator_mean.map(pct).unwrap_or_else(|| "NA".into()));
        }
        out.push_str("\t\t\n");
        out.push_str("random (expected)");
        for _ in Bucket::ALL {
            out.push('\t');
            out.push_str(&pct(EvalReport::RANDOM_REFERENCE));
        }
        out.push_str("\t\t\n");
        for row in &self.report.methods {
            out.push_str(&row.method);
            for c in &row.cells {
                out.push('\t');
                out.push_str(&c.as_ref().map(|c| pct(c.value)).unwrap_or_else(|_| "NA".into()));
            }
            // ties and abstentions over the widest bucket
            let widest = row.cells.first().and_then(|c| c.as_ref().ok());
            let (t, a) = widest.map(|c| (c.ties.to_string(), c.abstentions.to_string())).unwrap_or_default();
            out.push_str(&format!("\t{t}\t{a}\n"));
        }
        for (method, reason) in &self.failures {
            out.push_str(method);
            for _ in Bucket::ALL {
                out.push_str("\tNA");
            }
            out.push_str(&format!("\t\t# {}\n", reason.replace(['\t', '\n'], " ")));
        }
        out
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Cell<'a> {
            bucket: &'static str,
            #[serde(flatten)]
            value: Option<&'a PprefCell>,
            error: Option<String>,
        }
        #[derive(Serialize)]
        struct Row<'a> {
            method: &'a str,
            cells: Vec<Cell<'a>>,
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            records: usize,
            unresolved: usize,
            buckets: &'a [BucketSummary],
            random_reference: f64,
            methods: Vec<Row<'a>>,
            failures: Vec<Failure<'a>>,
        }
        #[derive(Serialize)]
        struct Failure<'a> {
            method: &'a str,
            reason: &'a str,
        }
        let methods = self
            .report
            .methods
            .iter()
            .map(|m| Row {
                method: &m.method,
                cells: Bucket::ALL
                    .iter()
                    .zip(&m.cells)
                    .map(|(b, c)| Cell {
                        bucket: b.label(),
                        value: c.as_ref().ok(),
                        error: c.as_ref().err().map(|e| e.to_string()),
                    })
                    .collect(),
            })
            .collect();
        let doc = Doc {
            records: self.records,
            unresolved: self.unresolved,
            buckets: &self.report.buckets,
            random_reference: EvalReport::RANDOM_REFERENCE,
            methods,
            failures: self.failures.iter().map(|(m, r)| Failure { method: m, reason: r }).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("report serializes")
    }
}

fn fmt_r(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_else(|| "NA".into())
}

pub fn correlation_tsv(m: &CorrelationMatrix) -> String {
    let mut out = String::from("method");
    for name in &m.methods {
        out.push('\t');
        out.push_str(name);
    }
    out.push('\n');
    for (name, row) in m.methods.iter().zip(&m.values) {
        out.push_str(name);
        for v in row {
            out.push('\t');
            out.push_str(&fmt_r(*v));
        }
        out.push('\n');
    }
    out
}

pub fn correlation_json(m: &CorrelationMatrix, records: usize, min_agreement: f64) -> String {
    #[derive(Serialize)]
    struct Doc<'a> {
        min_agreement: f64,
        records: usize,
        methods: &'a [String],
        /// `null` on the diagonal and where the coefficient is undefined.
        values: &'a [Vec<Option<f64>>],
    }
    serde_json::to_string_pretty(&Doc { min_agreement, records, methods: &m.methods, values: &m.values }).expect("serializes")
}

#[derive(Debug, Clone, Serialize)]
pub struct Step {
    pub name: String,
    pub millis: u128,
}

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub sha256: String,
}

/// What a command ran on and what it produced.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: &'static str,
    pub config_hash: String,
    pub store_fingerprint: Option<String>,
    pub corpus_fingerprint: Option<String>,
    pub steps: Vec<Step>,
    pub outputs: Vec<Artifact>,
}

impl RunManifest {
    pub fn new(command: &str, config_hash: String) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION"),
            config_hash,
            store_fingerprint: None,
            corpus_fingerprint: None,
            steps: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.steps.push(Step { name: name.into(), millis: start.elapsed().as_millis() });
        out
    }

    /// Writes an output atomically and records its hash.
    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
        write_atomic(path, bytes).map_err(|e| FormatError::io(path, e))?;
        self.outputs.push(Artifact { path: path.to_path_buf(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf, FormatError> {
        let path = dir.join(format!("manifest-{}.json", self.command));
        let bytes = serde_json::to_vec_pretty(self).expect("manifest serializes");
        write_atomic(&path, &bytes).map_err(|e| FormatError::io(&path, e))?;
        Ok(path)
    }
}
