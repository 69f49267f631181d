use std::collections::BTreeSet;

use kbrank_core::semantic::linalg::{CscMatrix, Matrix};
use kbrank_core::semantic::{
    cosine, train_lda, train_lsi, truncated_svd, LdaConfig, SemanticJudge, SvdOptions, TopicKind, TopicModel, TopicVector,
};
use kbrank_core::text::{BagOfWords, Corpus, DocumentId, Preprocessor, TfIdfModel};
use kbrank_core::{EntityId, EntityRecord, IngestFilter, KnowledgeStore, PreferenceJudge, PropertyDef, PropertyId};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn to_nalgebra(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_column_slice(m.rows(), m.cols(), m.as_slice())
}

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Best rank-k approximation from nalgebra's dense SVD.
fn dense_truncation(m: &Matrix, k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let svd = to_nalgebra(m).svd(true, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let mut approx = DMatrix::zeros(m.rows(), m.cols());
    let mut sigma = Vec::new();
    for &i in order.iter().take(k) {
        let s = svd.singular_values[i];
        sigma.push(s);
        approx += s * u.column(i) * vt.row(i);
    }
    (sigma, approx)
}

#[test]
fn truncated_svd_matches_dense_oracle_on_small_matrices() {
    for seed in 0..10 {
        let m = random_matrix(20, 20, seed);
        let a = CscMatrix::from_dense(&m);
        for k in [1, 3, 5, 10, 20] {
            let ours = truncated_svd(&a, k, &SvdOptions { seed, ..SvdOptions::default() }).unwrap();
            let (sigma, approx) = dense_truncation(&m, k);
            for (x, y) in ours.sigma.iter().zip(&sigma) {
                assert!((x - y).abs() <= 1e-6, "seed {seed} k {k}: {x} vs {y}");
            }
            let diff = (to_nalgebra(&ours.reconstruct()) - approx).abs().max();
            assert!(diff <= 1e-6, "seed {seed} k {k}: reconstruction differs by {diff}");
            let utu = ours.u.transpose().matmul(&ours.u).sub(&Matrix::identity(k)).max_abs();
            assert!(utu <= 1e-6);
            assert!(ours.sigma.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}

#[test]
fn leading_singular_value_matches_power_iteration() {
    let m = random_matrix(30, 12, 42);
    // plain power iteration on m^T m
    let mut v = vec![1.0; m.cols()];
    let mut sigma = 0.0;
    for _ in 0..5000 {
        let mv: Vec<f64> = (0..m.rows()).map(|i| (0..m.cols()).map(|j| m[(i, j)] * v[j]).sum()).collect();
        let mut w: Vec<f64> = (0..m.cols()).map(|j| (0..m.rows()).map(|i| m[(i, j)] * mv[i]).sum()).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        w.iter_mut().for_each(|x| *x /= norm);
        sigma = norm.sqrt();
        v = w;
    }
    let ours = truncated_svd(&CscMatrix::from_dense(&m), 1, &SvdOptions::default()).unwrap();
    assert!((ours.sigma[0] - sigma).abs() <= 1e-8, "{} vs {sigma}", ours.sigma[0]);
}

#[test]
fn rank_three_matrix_is_recovered() {
    let left = random_matrix(40, 3, 1);
    let right = random_matrix(3, 25, 2);
    let m = left.matmul(&right);
    let svd = truncated_svd(&CscMatrix::from_dense(&m), 3, &SvdOptions::default()).unwrap();
    let rel = svd.reconstruct().sub(&m).frobenius_norm() / m.frobenius_norm();
    assert!(rel <= 1e-6, "{rel}");
}

fn corpus_of(docs: &[&str]) -> Corpus {
    let pre = Preprocessor::default();
    Corpus::from_texts(docs.iter().enumerate().map(|(i, t)| (DocumentId(format!("W{i}")), *t)), &pre).unwrap()
}

#[test]
fn lsi_document_topics_equal_fold_in() {
    let corpus = corpus_of(&[
        "goal club league goal season match",
        "priest church order faith monk",
        "army battle regiment war officer",
        "goal match striker club cup",
        "church bishop priest saint order",
        "war army navy battle rank",
    ]);
    let tfidf = TfIdfModel::fit(corpus.vocabulary(), 0.0, 0.0).unwrap();
    let fit = train_lsi(&corpus, &tfidf, 3, &SvdOptions::default()).unwrap();
    for (doc, topics) in &fit.document_topics {
        let x = kbrank_core::text::vectorize(Some(&tfidf), corpus.bag(doc).unwrap());
        let folded = fit.model.fold_in(&x).unwrap();
        for (a, b) in topics.values.iter().zip(&folded.values) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

/// Documents drawn from two topics with disjoint supports.
fn two_topic_corpus(seed: u64) -> (Vec<BagOfWords>, [Vec<f64>; 2]) {
    let vocab = 20;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gen = [vec![0.0; vocab], vec![0.0; vocab]];
    for w in 0..vocab {
        gen[w / 10][w] = 1.0 + (w % 10) as f64;
    }
    for g in &mut gen {
        let s: f64 = g.iter().sum();
        g.iter_mut().for_each(|x| *x /= s);
    }
    let mut docs = Vec::new();
    for _ in 0..200 {
        let mix: f64 = rng.random();
        let mut counts = std::collections::BTreeMap::new();
        for _ in 0..50 {
            let t = usize::from(rng.random::<f64>() >= mix);
            let mut r: f64 = rng.random();
            let mut w = 0;
            while w + 1 < vocab && r >= gen[t][w] {
                r -= gen[t][w];
                w += 1;
            }
            *counts.entry(w).or_insert(0u32) += 1;
        }
        docs.push(BagOfWords::from_counts(counts));
    }
    (docs, gen)
}

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    d / (a.iter().map(|x| x * x).sum::<f64>().sqrt() * b.iter().map(|x| x * x).sum::<f64>().sqrt())
}

#[test]
fn lda_recovers_disjoint_topics_deterministically() {
    let (docs, gen) = two_topic_corpus(5);
    let config = LdaConfig { k: 2, alpha: 0.1, beta: 0.01, seed: 9, iterations: 200, inference_iterations: 50 };
    let model = train_lda(&docs, 20, &config).unwrap();
    for t in 0..2 {
        assert!((model.phi(t).iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }
    let straight = cos(model.phi(0), &gen[0]).min(cos(model.phi(1), &gen[1]));
    let crossed = cos(model.phi(0), &gen[1]).min(cos(model.phi(1), &gen[0]));
    assert!(straight.max(crossed) >= 0.8, "{straight} {crossed}");
    let again = train_lda(&docs, 20, &config).unwrap();
    let bits = |m: &kbrank_core::semantic::LdaModel| m.phi_flat().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&model), bits(&again));
    let theta = model.infer(&docs[0]).unwrap();
    assert!((theta.values.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert_eq!(model.infer(&docs[0]).unwrap(), theta);
}

fn vector() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 1..12)
}

proptest! {
    #[test]
    fn cosine_is_symmetric_bounded_and_scale_free(u in vector(), seed in any::<u64>(), a in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = u.iter().map(|_| rng.random_range(-10.0..10.0)).collect();
        let tu = TopicVector { kind: TopicKind::Lsi, values: u.clone() };
        let tv = TopicVector { kind: TopicKind::Lsi, values: v };
        let scaled = TopicVector { kind: TopicKind::Lsi, values: u.iter().map(|x| a * x).collect() };
        match (cosine(&tu, &tv), cosine(&tv, &tu)) {
            (Ok(x), Ok(y)) => {
                prop_assert_eq!(x, y);
                prop_assert!((-1.0..=1.0).contains(&x));
                prop_assert!((cosine(&scaled, &tv).unwrap() - x).abs() < 1e-12);
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "asymmetric failure"),
        }
    }
}

struct Fixture {
    store: KnowledgeStore,
    corpus: Corpus,
    pre: Preprocessor,
}

fn fixture() -> Fixture {
    let texts = [
        ("Q1", "goal club league season striker match goal"),
        ("Q2", "priest church monk order faith church"),
        ("Q3", "army battle officer war regiment rank"),
        ("Q4", "club match league goal cup season"),
        ("Q5", "bishop church order saint monastery priest"),
        ("Q6", "war navy officer battle rank army"),
    ];
    let props = [
        ("P1", "goals scored", "goals scored in a match by the player"),
        ("P2", "religious order", "order of monks to which a priest belongs"),
        ("P3", "military rank", "military rank achieved in the army"),
        ("P4", "follows", "immediately prior item in some series"),
    ];
    let defs = props.iter().map(|(id, l, d)| {
        let mut def = PropertyDef::new(PropertyId::new(*id).unwrap(), *l);
        def.description = d.to_string();
        def
    });
    let entities = texts.iter().map(|(id, _)| {
        let mut r = EntityRecord::new(EntityId::new(*id).unwrap(), *id);
        r.properties = props.iter().map(|(p, _, _)| PropertyId::new(*p).unwrap()).collect::<BTreeSet<_>>();
        r.article_ref = Some(DocumentId(format!("W{id}")));
        r
    });
    let store = KnowledgeStore::ingest(entities, defs, &IngestFilter::default()).unwrap().store;
    let pre = Preprocessor::default();
    let corpus = Corpus::from_texts(texts.iter().map(|(id, t)| (DocumentId(format!("W{id}")), *t)), &pre).unwrap();
    Fixture { store, corpus, pre }
}

#[test]
fn semantic_judges_mirror_under_swap() {
    let f = fixture();
    let tfidf = TfIdfModel::fit(f.corpus.vocabulary(), 0.0, 0.0).unwrap();
    let lsi = TopicModel::Lsi { model: train_lsi(&f.corpus, &tfidf, 3, &SvdOptions::default()).unwrap().model, tfidf };
    let bags: Vec<_> = f.corpus.documents().map(|(_, b)| b).collect();
    let lda = TopicModel::Lda(
        train_lda(bags, f.corpus.vocabulary().len(), &LdaConfig { k: 3, iterations: 100, inference_iterations: 40, ..LdaConfig::default() }).unwrap(),
    );
    for model in [&lsi, &lda] {
        let judge = SemanticJudge::new(&f.store, &f.corpus, &f.pre, model);
        for e in f.store.entities() {
            for p in f.store.properties() {
                for q in f.store.properties() {
                    let fwd = judge.judge(&e.id, &p.id, &q.id);
                    let back = judge.judge(&e.id, &q.id, &p.id);
                    match (fwd, back) {
                        (Ok(a), Ok(b)) => assert_eq!(a.winner, b.winner.mirrored()),
                        (Err(a), Err(b)) => assert!(a.is_abstention() && b.is_abstention()),
                        other => panic!("inconsistent: {other:?}"),
                    }
                }
            }
        }
    }
    let judge = SemanticJudge::new(&f.store, &f.corpus, &f.pre, &lsi);
    let (goals, rank) = judge
        .similarities(&EntityId::new("Q1").unwrap(), &PropertyId::new("P1").unwrap(), &PropertyId::new("P3").unwrap())
        .unwrap();
    assert!(goals > rank, "{goals} {rank}");
}
