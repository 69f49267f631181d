//! The `kbrank` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use kbrank_core::ensemble::{correlation_matrix, JudgmentMatrix};
use kbrank_core::gold::{
    agreement_distribution, bucket_summaries, evaluate, fleiss_kappa, GoldRecord, RandomAgreementModel, VOTES_PER_RECORD,
};
use kbrank_core::pivot::PivotKey;
use kbrank_core::semantic::TopicKind;
use kbrank_core::text::FeatureMode;
use kbrank_core::{EntityId, JudgeError, KnowledgeStore, PropertyId, Winner};
use serde::Serialize;

use crate::config::RunConfig;
use crate::methods::{echo_column, judge_records, record_id, resolve_record, Session};
use crate::report::{correlation_json, correlation_tsv, Evaluation, RunManifest};
use crate::tables::{load_gold, matrix_to_tsv, read_matrix};
use crate::workspace::Workspace;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ABSTAIN: i32 = 3;

const DEFAULT_CONFIG: &str = "kbrank.toml";

#[derive(Debug, Parser)]
#[command(name = "kbrank", version, about = "Rank knowledge-base properties by how interesting they are for an entity")]
pub struct Cli {
    /// Run configuration (TOML). Defaults to ./kbrank.toml when present.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the cache directory from the configuration and environment.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// More logging (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Lsi,
    Lda,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Counts,
    Tfidf,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load entities, properties and articles and report store and corpus statistics.
    Ingest,
    /// Agreement statistics of a gold dataset.
    Stats {
        #[arg(long)]
        gold: Option<PathBuf>,
    },
    /// Train a topic model and store it in the cache.
    TrainTopics {
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Topic count, overriding the configuration.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the model here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train (or load from cache) pivot models for a list of property pairs.
    TrainPivot {
        /// One pair per line: two property ids or labels, tab separated.
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        mode: ModeArg,
    },
    /// Ask one method which of two properties is more interesting for an entity.
    Judge {
        /// Entity id or label.
        #[arg(long)]
        entity: String,
        /// Property id or label.
        #[arg(long)]
        prop_a: String,
        /// Property id or label.
        #[arg(long)]
        prop_b: String,
        #[arg(long)]
        method: String,
    },
    /// ppref of methods on a gold dataset, by agreement bucket.
    Evaluate {
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Comma-separated method names, overriding the configuration.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
    },
    /// Pearson correlations between methods on high-agreement gold records.
    Correlate {
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        #[arg(long)]
        min_agreement: Option<f64>,
        /// Use a stored judgment matrix instead of running methods.
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Abstain(String),
    Error(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Error(e)
    }
}

type Outcome = Result<(), Failure>;

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(m)) => {
            eprintln!("usage error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Abstain(m)) => {
            eprintln!("abstained: {m}");
            EXIT_ABSTAIN
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None if Path::new(DEFAULT_CONFIG).is_file() => RunConfig::load(Path::new(DEFAULT_CONFIG))?,
        None => RunConfig::default(),
    };
    if let Some(dir) = &cli.cache_dir {
        // flags beat the environment, which beats the file
        std::env::set_var(crate::config::CACHE_DIR_ENV, dir);
        config.paths.cache_dir = Some(dir.clone());
    }
    if let Some(dir) = &cli.output_dir {
        config.paths.output_dir = Some(dir.clone());
    }
    Ok(config)
}

fn execute(cli: &Cli) -> Outcome {
    let config = load_config(cli)?;
    match &cli.command {
        Command::Ingest => ingest(config),
        Command::Stats { gold } => stats(config, gold.as_deref()),
        Command::TrainTopics { kind, k, seed, out } => train_topics(config, *kind, *k, *seed, out.as_deref()),
        Command::TrainPivot { pairs, mode } => train_pivot(config, pairs, *mode),
        Command::Judge { entity, prop_a, prop_b, method } => judge(config, entity, prop_a, prop_b, method),
        Command::Evaluate { gold, methods } => cmd_evaluate(config, gold.as_deref(), methods.clone()),
        Command::Correlate { gold, methods, min_agreement, matrix } => {
            correlate(config, gold.as_deref(), methods.clone(), *min_agreement, matrix.as_deref())
        }
    }
}

fn load_workspace(config: RunConfig, manifest: &mut RunManifest) -> anyhow::Result<Workspace> {
    let ws = manifest.time("load", || Workspace::load(config))?;
    manifest.store_fingerprint = Some(ws.store_fingerprint.clone());
    manifest.corpus_fingerprint = Some(ws.corpus_fingerprint.clone());
    Ok(ws)
}

fn ingest(config: RunConfig) -> Outcome {
    let mut manifest = RunManifest::new("ingest", config.hash());
    let ws = load_workspace(config, &mut manifest)?;
    let stats = ws.stats();
    println!("entities\t{}", stats.entities);
    println!("properties\t{}", stats.properties);
    println!("skipped records\t{}", stats.skipped);
    println!("documents\t{}", stats.documents);
    println!("vocabulary\t{}", stats.vocabulary);
    match stats.tfidf_retained {
        Some(n) => println!("tfidf terms\t{n}"),
        None => println!("tfidf terms\tNA"),
    }
    println!("store fingerprint\t{}", stats.store_fingerprint);
    println!("corpus fingerprint\t{}", stats.corpus_fingerprint);
    println!("usage");
    let mut usage_tsv = String::from("property\tlabel\tusage\n");
    for row in &stats.usage {
        println!("  {}\t{}\t{}", row.property, row.label, row.usage);
        usage_tsv.push_str(&format!("{}\t{}\t{}\n", row.property, row.label, row.usage));
    }
    let out = ws.config.output_dir();
    manifest.write(&out.join("ingest.json"), serde_json::to_string_pretty(&stats).context("stats")?.as_bytes())?;
    manifest.write(&out.join("usage.tsv"), usage_tsv.as_bytes())?;
    manifest.save(&out)?;
    Ok(())
}

fn gold_path(config: &RunConfig, flag: Option<&Path>) -> anyhow::Result<PathBuf> {
    match flag {
        Some(p) => Ok(p.to_path_buf()),
        None => Ok(config.input("gold", &config.paths.gold)?),
    }
}

#[derive(Serialize)]
struct GoldStats {
    records: usize,
    mean_agreement: f64,
    fleiss_kappa: Option<f64>,
    /// Majority size (5..=10) to record count.
    histogram: Vec<(u32, usize)>,
    buckets: Vec<kbrank_core::gold::BucketSummary>,
    random_model: Vec<RandomLevel>,
}

#[derive(Serialize)]
struct RandomLevel {
    majority: u32,
    numerator: u64,
    denominator: u64,
    probability: f64,
}

fn stats(config: RunConfig, gold: Option<&Path>) -> Outcome {
    let mut manifest = RunManifest::new("stats", config.hash());
    let path = gold_path(&config, gold)?;
    let records = load_gold(&path)?;
    let hist = agreement_distribution(&records).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    let kappa = fleiss_kappa(&records);
    let model = RandomAgreementModel::new(VOTES_PER_RECORD).expect("ten votes");
    println!("records\t{}", records.len());
    println!("mean agreement\t{:.4}", hist.mean);
    match &kappa {
        Ok(k) => println!("fleiss kappa\t{k:.4}"),
        Err(e) => println!("fleiss kappa\tNA ({e})"),
    }
    println!("agreement\trecords\tshare\trandom");
    for (&m, &n) in &hist.counts {
        println!("{:.1}\t{n}\t{:.4}\t{:.4}", m as f64 / VOTES_PER_RECORD as f64, hist.share(m), model.probability(m));
    }
    let buckets = bucket_summaries(&records);
    println!("bucket\tn\tannotators");
    for b in &buckets {
        println!("{}\t{}\t{}", b.bucket, b.n, b.annotator_mean.map(|m| format!("{:.1}", 100.0 * m)).unwrap_or_else(|| "NA".into()));
    }
    let doc = GoldStats {
        records: records.len(),
        mean_agreement: hist.mean,
        fleiss_kappa: kappa.ok(),
        histogram: hist.counts.iter().map(|(&m, &n)| (m, n)).collect(),
        buckets,
        random_model: model
            .levels()
            .map(|(m, p)| RandomLevel { majority: m, numerator: model.numerator(m), denominator: model.denominator(), probability: p })
            .collect(),
    };
    let out = config.output_dir();
    manifest.write(&out.join("gold-stats.json"), serde_json::to_string_pretty(&doc).context("stats")?.as_bytes())?;
    manifest.save(&out)?;
    Ok(())
}

fn train_topics(mut config: RunConfig, kind: KindArg, k: Option<usize>, seed: Option<u64>, out: Option<&Path>) -> Outcome {
    let kind = match kind {
        KindArg::Lsi => TopicKind::Lsi,
        KindArg::Lda => TopicKind::Lda,
    };
    match kind {
        TopicKind::Lsi => {
            config.lsi.k = k.unwrap_or(config.lsi.k);
            config.lsi.seed = seed.unwrap_or(config.lsi.seed);
        }
        TopicKind::Lda => {
            config.lda.k = k.unwrap_or(config.lda.k);
            config.lda.seed = seed.unwrap_or(config.lda.seed);
        }
    }
    let mut manifest = RunManifest::new(&format!("train-topics-{}", kind.as_str()), config.hash());
    let ws = load_workspace(config, &mut manifest)?;
    let session = Session::new(&ws);
    let model = manifest.time("train", || session.train_topic_model(kind)).map_err(|e| anyhow!("training {}: {e}", kind.as_str()))?;
    let cached = session.topic_model_path(kind);
    println!("kind\t{}", kind.as_str());
    println!("topics\t{}", model.k());
    println!("vocabulary\t{}", ws.corpus.vocabulary().len());
    if let kbrank_core::semantic::TopicModel::Lsi { model, .. } = &model {
        let shown: Vec<String> = model.sigma.iter().take(10).map(|s| format!("{s:.6}")).collect();
        println!("leading singular values\t{}", shown.join(" "));
    }
    println!("model\t{}", cached.display());
    if let Some(out) = out {
        let bytes = std::fs::read(&cached).with_context(|| format!("reading {}", cached.display()))?;
        manifest.write(out, &bytes)?;
    }
    manifest.outputs.push(crate::report::Artifact {
        path: cached.clone(),
        sha256: crate::formats::sha256_hex(&std::fs::read(&cached).with_context(|| format!("reading {}", cached.display()))?),
    });
    manifest.save(&ws.config.output_dir())?;
    Ok(())
}

fn find_entity(store: &KnowledgeStore, s: &str) -> Option<EntityId> {
    EntityId::new(s).ok().filter(|id| store.entity(id).is_ok()).or_else(|| store.entity_by_label(s).cloned())
}

fn find_property(store: &KnowledgeStore, s: &str) -> Option<PropertyId> {
    PropertyId::new(s).ok().filter(|id| store.property(id).is_ok()).or_else(|| store.property_by_label(s).cloned())
}

fn train_pivot(config: RunConfig, pairs: &Path, mode: ModeArg) -> Outcome {
    let mut manifest = RunManifest::new("train-pivot", config.hash());
    let text = std::fs::read_to_string(pairs).with_context(|| format!("reading {}", pairs.display()))?;
    let ws = load_workspace(config, &mut manifest)?;
    let session = Session::new(&ws);
    let modes: &[FeatureMode] = match mode {
        ModeArg::Counts => &[FeatureMode::Counts],
        ModeArg::Tfidf => &[FeatureMode::TfIdf],
        ModeArg::Both => &[FeatureMode::Counts, FeatureMode::TfIdf],
    };
    println!("first\tsecond\tmode\tstatus\tholdout_accuracy");
    let mut report = String::from("first\tsecond\tmode\tstatus\tholdout_accuracy\n");
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = if line.contains('\t') { line.split('\t').collect() } else { line.split_whitespace().collect() };
        if parts.len() != 2 {
            return Err(Failure::Usage(format!("{}:{}: expected two properties", pairs.display(), n + 1)));
        }
        let resolve = |s: &str| find_property(&ws.store, s.trim()).ok_or_else(|| anyhow!("{}:{}: unknown property {s:?}", pairs.display(), n + 1));
        let (p, q) = (resolve(parts[0])?, resolve(parts[1])?);
        if p == q {
            return Err(Failure::Usage(format!("{}:{}: a property cannot pivot against itself", pairs.display(), n + 1)));
        }
        for &m in modes {
            let (key, _) = PivotKey::canonical(&p, &q, m);
            let (status, acc) = match manifest.time(&format!("{key}"), || session.pivot_cache().warm(&key)) {
                Ok(w) => (if w.from_disk { "cached".to_string() } else { "trained".to_string() }, w.holdout_accuracy),
                Err(e) => (format!("failed: {e}"), None),
            };
            let acc = acc.map(|a| format!("{a:.4}")).unwrap_or_else(|| "NA".into());
            let row = format!("{}\t{}\t{}\t{status}\t{acc}", key.first, key.second, m.as_str());
            println!("{row}");
            report.push_str(&row);
            report.push('\n');
        }
    }
    let out = ws.config.output_dir();
    manifest.write(&out.join("pivot-training.tsv"), report.as_bytes())?;
    manifest.save(&out)?;
    Ok(())
}

fn judge(config: RunConfig, entity: &str, prop_a: &str, prop_b: &str, method: &str) -> Outcome {
    let mut manifest = RunManifest::new("judge", config.hash());
    let ws = load_workspace(config, &mut manifest)?;
    let e = find_entity(&ws.store, entity).ok_or_else(|| Failure::Usage(format!("unknown entity {entity:?}")))?;
    let p = find_property(&ws.store, prop_a).ok_or_else(|| Failure::Usage(format!("unknown property {prop_a:?}")))?;
    let q = find_property(&ws.store, prop_b).ok_or_else(|| Failure::Usage(format!("unknown property {prop_b:?}")))?;
    if p == q {
        return Err(Failure::Usage("the two properties must differ".into()));
    }
    let session = Session::new(&ws);
    let judge = match session.judge(method) {
        Ok(j) => j,
        Err(err @ (crate::methods::MethodError::Unknown(_) | crate::methods::MethodError::UnknownEnsemble(_))) => {
            return Err(Failure::Usage(err.to_string()))
        }
        Err(err @ crate::methods::MethodError::NeedsGold(_)) => return Err(Failure::Usage(err.to_string())),
        Err(err) => return Err(Failure::Error(err.into())),
    };
    match judge.judge(&e, &p, &q) {
        Ok(j) => {
            let label = |id: &PropertyId| ws.store.property(id).map(|d| d.label.clone()).unwrap_or_default();
            let winner = match j.winner {
                Winner::First => format!("FIRST\t{p}\t{}", label(&p)),
                Winner::Second => format!("SECOND\t{q}\t{}", label(&q)),
                Winner::Tie => "TIE".to_string(),
            };
            println!("method\t{method}");
            println!("entity\t{e}\t{}", ws.store.entity(&e).map(|r| r.label.as_str()).unwrap_or(""));
            println!("winner\t{winner}");
            let score = |x: f64| if x.is_nan() { "NA".to_string() } else { x.to_string() };
            println!("score_a\t{}", score(j.score_first));
            println!("score_b\t{}", score(j.score_second));
            Ok(())
        }
        Err(JudgeError::Abstain(m)) => Err(Failure::Abstain(m)),
        Err(err) => Err(Failure::Error(err.into())),
    }
}

/// Runs each method over the gold records. Methods that cannot be built are
/// returned separately.
fn judgment_columns(
    session: &Session<'_>,
    records: &[GoldRecord],
    methods: &[String],
) -> (Vec<(String, Vec<kbrank_core::ensemble::Cell>)>, Vec<(String, String)>, usize) {
    let resolved: Vec<_> = records.iter().map(|r| resolve_record(&session.ws.store, r)).collect();
    let unresolved = resolved.iter().filter(|r| r.is_none()).count();
    if unresolved > 0 {
        log::warn!("{unresolved} gold records reference entities or properties missing from the store");
    }
    let mut columns = Vec::new();
    let mut failures = Vec::new();
    for m in methods {
        if m == "echo" {
            columns.push((m.clone(), echo_column(records)));
            continue;
        }
        match session.judge(m) {
            Ok(j) => columns.push((m.clone(), judge_records(j.as_ref(), &resolved))),
            Err(e) => {
                log::warn!("{e}");
                failures.push((m.clone(), e.to_string()));
            }
        }
    }
    (columns, failures, unresolved)
}

fn cmd_evaluate(config: RunConfig, gold: Option<&Path>, methods: Option<Vec<String>>) -> Outcome {
    let mut manifest = RunManifest::new("evaluate", config.hash());
    let path = gold_path(&config, gold)?;
    let records = load_gold(&path)?;
    let methods = methods.unwrap_or_else(|| config.evaluation.methods.clone());
    let ws = load_workspace(config, &mut manifest)?;
    let session = Session::new(&ws);
    let (columns, failures, unresolved) = manifest.time("judge", || judgment_columns(&session, &records, &methods));
    let report = evaluate(&columns, &records).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    let eval = Evaluation { report, failures, records: records.len(), unresolved };
    let tsv = eval.to_tsv();
    print!("{tsv}");
    let out = ws.config.output_dir();
    manifest.write(&out.join("eval.tsv"), tsv.as_bytes())?;
    manifest.write(&out.join("eval.json"), eval.to_json().as_bytes())?;
    let matrix = to_matrix(&columns, records.len())?;
    manifest.write(&out.join("judgments.tsv"), &matrix_to_tsv(&matrix))?;
    manifest.save(&out)?;
    Ok(())
}

fn to_matrix(columns: &[(String, Vec<kbrank_core::ensemble::Cell>)], rows: usize) -> anyhow::Result<JudgmentMatrix> {
    let mut m = JudgmentMatrix::new(columns.iter().map(|(n, _)| n.clone()).collect())?;
    for i in 0..rows {
        m.push_row(record_id(i), columns.iter().map(|(_, c)| c[i]).collect())?;
    }
    Ok(m)
}

fn correlate(
    config: RunConfig,
    gold: Option<&Path>,
    methods: Option<Vec<String>>,
    min_agreement: Option<f64>,
    matrix_path: Option<&Path>,
) -> Outcome {
    let mut manifest = RunManifest::new("correlate", config.hash());
    let min_agreement = min_agreement.unwrap_or(config.evaluation.min_agreement);
    let gold_file = gold_path(&config, gold);
    let (matrix, records, out) = match matrix_path {
        Some(mp) => {
            let matrix = read_matrix(mp)?;
            let records = match gold_file {
                Ok(p) => Some(load_gold(&p)?),
                Err(e) if min_agreement > 0.5 => return Err(Failure::Error(e.context("filtering by agreement needs the gold records"))),
                Err(_) => None,
            };
            (matrix, records, config.output_dir())
        }
        None => {
            let path = gold_file?;
            let records = load_gold(&path)?;
            let methods = methods.unwrap_or_else(|| config.evaluation.methods.clone());
            let ws = load_workspace(config, &mut manifest)?;
            let session = Session::new(&ws);
            let (columns, failures, _) = manifest.time("judge", || judgment_columns(&session, &records, &methods));
            for (m, reason) in failures {
                eprintln!("skipping {m}: {reason}");
            }
            let matrix = to_matrix(&columns, records.len())?;
            (matrix, Some(records), ws.config.output_dir())
        }
    };
    let filtered = match &records {
        Some(records) => {
            let agreement: std::collections::HashMap<String, f64> =
                records.iter().enumerate().map(|(i, r)| (record_id(i), r.agreement())).collect();
            for id in matrix.records() {
                if !agreement.contains_key(id) {
                    return Err(Failure::Error(anyhow!("matrix record {id} has no gold record")));
                }
            }
            matrix.filter_rows(|i| agreement[&matrix.records()[i]] + 1e-9 >= min_agreement)
        }
        None => matrix,
    };
    eprintln!("correlating {} records with agreement >= {min_agreement}", filtered.len());
    log::info!("correlating {} records", filtered.len());
    let corr = correlation_matrix(&filtered);
    let tsv = correlation_tsv(&corr);
    print!("{tsv}");
    manifest.write(&out.join("correlation.tsv"), tsv.as_bytes())?;
    manifest.write(&out.join("correlation.json"), correlation_json(&corr, filtered.len(), min_agreement).as_bytes())?;
    manifest.save(&out)?;
    Ok(())
}

impl From<crate::formats::FormatError> for Failure {
    fn from(e: crate::formats::FormatError) -> Self {
        Failure::Error(e.into())
    }
}

impl From<crate::tables::TableError> for Failure {
    fn from(e: crate::tables::TableError) -> Self {
        Failure::Error(e.into())
    }
}
