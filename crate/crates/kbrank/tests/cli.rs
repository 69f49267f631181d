use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy/config.toml")
}

struct Run {
    dir: TempDir,
}

impl Run {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn cmd(&self) -> Command {
        let mut c = Command::new(env!("CARGO_BIN_EXE_kbrank"));
        c.arg("--config")
            .arg(config())
            .arg("--cache-dir")
            .arg(self.dir.path().join("cache"))
            .arg("--output-dir")
            .arg(self.dir.path().join("out"))
            .env_remove("KBRANK_CACHE_DIR");
        c
    }

    fn run(&self, args: &[&str]) -> Output {
        self.cmd().args(args).output().unwrap()
    }

    fn out(&self, name: &str) -> String {
        std::fs::read_to_string(self.dir.path().join("out").join(name)).unwrap()
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines().find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('\t'))).unwrap_or_else(|| panic!("{key} in {text}"))
}

/// judgments.tsv as record -> method -> cell.
fn judgments(text: &str) -> BTreeMap<String, BTreeMap<String, String>> {
    let mut m: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split('\t').collect();
        m.entry(cols[0].into()).or_default().insert(cols[1].into(), cols[2].into());
    }
    m
}

#[test]
fn missing_input_names_the_path() {
    let run = Run::new();
    let o = run.run(&["stats", "--gold", "/nonexistent/gold.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/nonexistent/gold.csv"), "{}", stderr(&o));
}

#[test]
fn identical_properties_are_a_usage_error() {
    let run = Run::new();
    let o = run.run(&["judge", "--entity", "Q1", "--prop-a", "P1", "--prop-b", "place of birth", "--method", "human_frequency"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn unknown_method_and_bad_flags_are_usage_errors() {
    let run = Run::new();
    let o = run.run(&["judge", "--entity", "Q1", "--prop-a", "P1", "--prop-b", "P2", "--method", "astrology"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(run.run(&["judge", "--entity", "Q1"]).status.code(), Some(2));
}

#[test]
fn entity_without_article_abstains() {
    let run = Run::new();
    let o = run.run(&["judge", "--entity", "Mira Undocumented", "--prop-a", "P1", "--prop-b", "P2", "--method", "lsi"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("no article"), "{}", stderr(&o));
}

#[test]
fn human_frequency_prefers_the_more_used_property() {
    // military conflict is held by 7 toy entities, drafted by by 3
    let run = Run::new();
    let o = run.run(&[
        "judge",
        "--entity",
        "Albert Johnson",
        "--prop-a",
        "military conflict",
        "--prop-b",
        "drafted by",
        "--method",
        "human_frequency",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(field(&s, "winner").starts_with("FIRST"), "{s}");
    assert!(field(&s, "winner").ends_with("military conflict"));
    assert_eq!(field(&s, "score_a"), "7");
    assert_eq!(field(&s, "score_b"), "3");
}

#[test]
fn ingest_reports_toy_sizes_and_a_stable_fingerprint() {
    let (a, b) = (Run::new(), Run::new());
    let first = stdout(&a.run(&["ingest"]));
    let second = stdout(&b.run(&["ingest"]));
    assert_eq!(field(&first, "entities"), "105");
    assert_eq!(field(&first, "properties"), "26");
    assert_eq!(field(&first, "documents"), "104");
    assert_eq!(field(&first, "store fingerprint"), field(&second, "store fingerprint"));
    assert_eq!(field(&first, "corpus fingerprint"), field(&second, "corpus fingerprint"));
    assert!(a.dir.path().join("out/usage.tsv").is_file());
}

#[test]
fn evaluate_echo_row_is_perfect_and_ensemble_is_member_majority() {
    let run = Run::new();
    let o = run.run(&["evaluate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let eval = run.out("eval.tsv");
    let echo = eval.lines().find(|l| l.starts_with("echo\t")).unwrap();
    let cols: Vec<&str> = echo.split('\t').collect();
    assert_eq!(&cols[1..5], ["100.0"; 4]);

    let members = ["search_count", "lsi", "lda", "occupation_frequency", "regression_tfidf"];
    for (record, row) in judgments(&run.out("judgments.tsv")) {
        let count = |c: &str| members.iter().filter(|m| row[**m] == c).count();
        let (f, s) = (count("FIRST"), count("SECOND"));
        let expected = if members.iter().all(|m| row[*m] == "ABSTAIN") {
            "ABSTAIN"
        } else if f > s {
            "FIRST"
        } else if s > f {
            "SECOND"
        } else {
            "TIE"
        };
        assert_eq!(row["ensemble:best5"], expected, "{record}");
    }
}

#[test]
fn seeded_random_is_reproducible() {
    let (a, b) = (Run::new(), Run::new());
    for r in [&a, &b] {
        assert!(r.run(&["evaluate", "--methods", "random"]).status.success());
    }
    assert_eq!(a.out("judgments.tsv"), b.out("judgments.tsv"));
}

#[test]
fn a_renamed_copy_correlates_perfectly() {
    let run = Run::new();
    assert!(run.run(&["evaluate", "--methods", "human_frequency,lda"]).status.success());
    let mut text = run.out("judgments.tsv");
    let copies: String = text.lines().filter(|l| l.contains("\thuman_frequency\t")).map(|l| l.replace("human_frequency", "copy") + "\n").collect();
    text.push_str(&copies);
    let matrix = run.dir.path().join("copied.tsv");
    std::fs::write(&matrix, text).unwrap();
    let o = run.run(&["correlate", "--matrix", matrix.to_str().unwrap(), "--min-agreement", "0.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("correlating 20 records"), "{}", stderr(&o));
    let tsv = run.out("correlation.tsv");
    let header: Vec<&str> = tsv.lines().next().unwrap().split('\t').collect();
    let row: Vec<&str> = tsv.lines().find(|l| l.starts_with("human_frequency\t")).unwrap().split('\t').collect();
    let col = header.iter().position(|h| *h == "copy").unwrap();
    assert_eq!(row[col].parse::<f64>().unwrap(), 1.0, "{tsv}");
}

#[test]
fn stored_matrix_can_be_correlated_again() {
    let run = Run::new();
    assert!(run.run(&["evaluate", "--methods", "human_frequency,lsi,lda"]).status.success());
    let matrix = run.dir.path().join("out/judgments.tsv");
    let o = run.run(&["correlate", "--matrix", matrix.to_str().unwrap(), "--min-agreement", "0.8"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("correlating 12 records"), "{}", stderr(&o));
}

#[test]
fn cache_dir_comes_from_the_environment() {
    let run = Run::new();
    let env_cache = run.dir.path().join("env-cache");
    let o = Command::new(env!("CARGO_BIN_EXE_kbrank"))
        .arg("--config")
        .arg(config())
        .arg("--output-dir")
        .arg(run.dir.path().join("out"))
        .args(["train-topics", "--kind", "lsi"])
        .env("KBRANK_CACHE_DIR", &env_cache)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(std::fs::read_dir(&env_cache).unwrap().next().is_some());
}

#[test]
fn retraining_topics_gives_identical_models() {
    let (a, b) = (Run::new(), Run::new());
    let read = |r: &Run| {
        let o = stdout(&r.run(&["train-topics", "--kind", "lda"]));
        std::fs::read(field(&o, "model")).unwrap()
    };
    assert_eq!(read(&a), read(&b));
}

#[test]
fn outputs_leave_no_temporary_files() {
    let run = Run::new();
    assert!(run.run(&["stats"]).status.success());
    let names: Vec<String> =
        std::fs::read_dir(run.dir.path().join("out")).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    assert!(names.contains(&"gold-stats.json".to_string()));
    assert!(names.contains(&"manifest-stats.json".to_string()));
    assert!(names.iter().all(|n| !n.starts_with('.') && !n.ends_with(".tmp")), "{names:?}");
}

#[test]
fn pivot_training_rejects_identical_pairs() {
    let run = Run::new();
    let pairs = run.dir.path().join("pairs.tsv");
    std::fs::write(&pairs, "P1\tP1\n").unwrap();
    let o = run.run(&["train-pivot", "--pairs", pairs.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn pivot_training_reports_holdout_accuracy() {
    let run = Run::new();
    let pairs = run.dir.path().join("pairs.tsv");
    std::fs::write(&pairs, "military conflict\tdrafted by\n").unwrap();
    let o = run.run(&["train-pivot", "--pairs", pairs.to_str().unwrap(), "--mode", "counts"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(run.out("pivot-training.tsv").lines().count() >= 2);
}
