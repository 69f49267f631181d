use kbrank_core::pivot::{train, Example, LogisticParams, Objective};
use kbrank_core::pivot::{train_key, ArticleFeatures, PivotConfig, PivotJudge, PivotKey, PretrainedModels};
use kbrank_core::text::{Corpus, DocumentId, FeatureMode, Preprocessor, SparseVector};
use kbrank_core::{EntityId, EntityRecord, IngestFilter, KnowledgeStore, PreferenceJudge, PropertyDef, PropertyId, Winner};
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = (usize, Vec<Example>, Vec<f64>, f64)> {
    (1usize..8).prop_flat_map(|dim| {
        let example = (prop::collection::btree_map(0..dim, -3.0f64..3.0, 0..=dim), prop::bool::ANY)
            .prop_map(|(f, y)| Example { features: SparseVector(f.into_iter().collect()), label: if y { 1.0 } else { 0.0 } });
        (
            Just(dim),
            prop::collection::vec(example, 1..20),
            prop::collection::vec(-2.0f64..2.0, dim + 1),
            prop_oneof![Just(0.0), 1e-4f64..0.5],
        )
    })
}

proptest! {
    #[test]
    fn gradient_matches_central_differences((dim, examples, params, l2) in instance()) {
        let obj = Objective::new(&examples, dim, l2);
        let g = obj.gradient(&params);
        let h = 1e-5;
        let mut diff = 0.0;
        let mut norm = 0.0;
        for i in 0..=dim {
            let mut up = params.clone();
            let mut down = params.clone();
            up[i] += h;
            down[i] -= h;
            let fd = (obj.loss(&up) - obj.loss(&down)) / (2.0 * h);
            diff += (fd - g[i]).powi(2);
            norm += g[i].powi(2);
        }
        let rel = diff.sqrt() / norm.sqrt().max(1e-8);
        prop_assert!(rel <= 1e-4, "relative error {}", rel);
    }

    #[test]
    fn loss_never_increases((dim, examples, _p, l2) in instance(), lr in 0.01f64..50.0, seed in any::<u64>()) {
        let params = LogisticParams { learning_rate: lr, l2, max_epochs: 60, tolerance: 0.0, seed };
        let trained = train(&examples, dim, FeatureMode::Counts, &params);
        prop_assert_eq!(trained.loss_history.len(), trained.model.meta.epochs + 1);
        for w in trained.loss_history.windows(2) {
            prop_assert!(w[1] <= w[0], "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn same_seed_same_weights((dim, examples, _p, l2) in instance(), seed in any::<u64>()) {
        let params = LogisticParams { l2, seed, max_epochs: 30, ..LogisticParams::default() };
        let a = train(&examples, dim, FeatureMode::Counts, &params);
        let b = train(&examples, dim, FeatureMode::Counts, &params);
        prop_assert_eq!(a.model.bias.to_bits(), b.model.bias.to_bits());
        prop_assert_eq!(a.model.weights.len(), b.model.weights.len());
        for ((i, x), (j, y)) in a.model.weights.iter().zip(&b.model.weights) {
            prop_assert_eq!(i, j);
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

struct Fixture {
    store: KnowledgeStore,
    corpus: Corpus,
}

/// Athletes hold P1 and write about goals, clerics hold P2 and write about
/// priests; a few entities hold P3 as well.
fn fixture() -> Fixture {
    let props = (1..=3).map(|i| PropertyDef::new(PropertyId::new(format!("P{i}")).unwrap(), format!("p{i}")));
    let mut entities = Vec::new();
    let mut texts = Vec::new();
    for i in 0..40 {
        let athlete = i % 2 == 0;
        let mut r = EntityRecord::new(EntityId::new(format!("Q{}", 100 + i)).unwrap(), format!("e{i}"));
        r.properties.insert(PropertyId::new(if athlete { "P1" } else { "P2" }).unwrap());
        if i % 5 == 0 {
            r.properties.insert(PropertyId::new("P3").unwrap());
        }
        r.article_ref = Some(DocumentId(format!("W{i}")));
        entities.push(r);
        let words = if athlete { "goal match league goal season" } else { "priest church order priest faith" };
        texts.push((DocumentId(format!("W{i}")), format!("{words} career {i}")));
    }
    let store = KnowledgeStore::ingest(entities, props, &IngestFilter::default()).unwrap().store;
    let pre = Preprocessor::default();
    let corpus = Corpus::from_texts(texts.iter().map(|(d, t)| (d.clone(), t.as_str())), &pre).unwrap();
    Fixture { store, corpus }
}

#[test]
fn separable_pivot_reaches_full_holdout_accuracy() {
    let f = fixture();
    let features = ArticleFeatures::new(&f.store, &f.corpus, None);
    let config = PivotConfig { cap: 100, holdout: 8, min_side: 5 };
    let (key, _) = PivotKey::canonical(&PropertyId::new("P1").unwrap(), &PropertyId::new("P2").unwrap(), FeatureMode::Counts);
    let (dataset, trained) = train_key(&key, &features, &config, &LogisticParams::default()).unwrap();
    assert_eq!(dataset.holdout().count(), 8);
    let acc = kbrank_core::pivot::pivot_accuracy(&trained.model, &dataset, &features).unwrap();
    assert_eq!(acc, 1.0);
    let goal = f.corpus.vocabulary().id("goal").unwrap();
    let priest = f.corpus.vocabulary().id("priest").unwrap();
    assert!(trained.model.weights[&goal] > 0.0);
    assert!(trained.model.weights[&priest] < 0.0);
}

#[test]
fn pivot_judge_is_antisymmetric_on_every_entity_and_pair() {
    let f = fixture();
    let features = ArticleFeatures::new(&f.store, &f.corpus, None);
    let config = PivotConfig { cap: 100, holdout: 4, min_side: 2 };
    let ids: Vec<PropertyId> = (1..=3).map(|i| PropertyId::new(format!("P{i}")).unwrap()).collect();
    let mut models = PretrainedModels::default();
    for a in 0..3 {
        for b in a + 1..3 {
            let (key, _) = PivotKey::canonical(&ids[a], &ids[b], FeatureMode::Counts);
            let (_, trained) = train_key(&key, &features, &config, &LogisticParams::default()).unwrap();
            models.insert(key, trained.model);
        }
    }
    let judge = PivotJudge::new(features, &models, FeatureMode::Counts);
    let mut decided = 0;
    for e in f.store.entities() {
        for p in &ids {
            for q in &ids {
                let fwd = judge.judge(&e.id, p, q).unwrap();
                let back = judge.judge(&e.id, q, p).unwrap();
                assert_eq!(fwd.winner, back.winner.mirrored());
                decided += usize::from(fwd.winner != Winner::Tie);
            }
        }
    }
    assert!(decided > 0);
}
