mod common;

use archon_core::agents::{ExperimentReport, ResourceUsage, TaskPlan};
use archon_core::arch::TaskType;
use archon_core::gateway::schema::{Budget, Metric};
use archon_core::gateway::{Gateway, HashEmbedder, ScriptedProvider};
use archon_core::knowledge::{
    post_rank, FacetType, KnowledgeError, KnowledgeStore, RankedEntry, ResourceType, RetrievalQuery,
    Scope, SourceDocument, Stage, WeightTable,
};
use archon_core::rng::SplitMix64;
use common::*;

fn doc(id: &str, resource_type: ResourceType, body: &str) -> SourceDocument {
    SourceDocument {
        doc_id: id.into(),
        resource_type,
        title: id.into(),
        body: body.into(),
        origin: "test".into(),
    }
}

fn single_facet_gateway(facets: &[(&str, &str)]) -> Gateway {
    let mut fixture = String::new();
    for (doc_id, text) in facets {
        fixture.push_str(&format!(
            "{}\n{}\n",
            serde_json::json!({"template_id": "summarize-doc", "match": {"doc_id": doc_id},
                "payload": {"problem": "p", "approach": "a", "summary": "s"}}),
            serde_json::json!({"template_id": "extract-facets", "match": {"doc_id": doc_id},
                "payload": {"facets": [{"facet_type": "architecture-design", "text": text}]}}),
        ));
    }
    Gateway::scripted(ScriptedProvider::from_jsonl(&fixture).unwrap())
}

#[test]
fn demo_corpus_ingests_in_order() {
    let store = KnowledgeStore::new();
    let ids = ingest_demo(&store, &gateway(&["ingest.jsonl"]));
    assert_eq!(
        ids,
        vec!["skipgnn/f01", "skipgnn/f02", "pyg-docs/f01", "pyg-docs/f02", "ogb-leaderboard/f01"]
    );
    let skip = store.item("skipgnn/f01").unwrap();
    assert_eq!(skip.facet_type, FacetType::ArchitectureDesign);
    assert!(skip.text.contains("skip"));
    assert_eq!(skip.resource_type, ResourceType::Paper);
    assert!(store.summary("skipgnn").is_some());
    assert_eq!(store.prior_count(), 5);
    assert_eq!(store.experiment_count(), 0);
    for item in store.items() {
        let norm = item.embedding.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() <= 1e-9, "{}", item.item_id);
        assert_eq!(item.embedding, oracle_embed(&item.text));
    }
}

#[test]
fn duplicate_and_empty_documents_are_rejected() {
    let gw = gateway(&["ingest.jsonl"]);
    let store = KnowledgeStore::new();
    ingest_demo(&store, &gw);
    let before = store.snapshot_string();
    let again = store.document("skipgnn").unwrap();
    let err = store.ingest_document(again, &gw).unwrap_err();
    assert!(matches!(err, KnowledgeError::Duplicate { ref doc_id } if doc_id == "skipgnn"));
    assert_eq!(store.snapshot_string(), before);

    let calls = gw.transcript().len();
    let err = store.ingest_document(doc("blank", ResourceType::Docs, "  \n"), &gw).unwrap_err();
    assert!(matches!(err, KnowledgeError::InvalidDocument(_)));
    assert_eq!(gw.transcript().len(), calls);
}

#[test]
fn extraction_failure_carries_transcript() {
    let fixture = r#"
{"template_id": "summarize-doc", "payload": {"problem": "p", "approach": "a", "summary": "s"}}
{"template_id": "extract-facets", "raw": "no json here"}
"#;
    let gw = Gateway::scripted(ScriptedProvider::from_jsonl(fixture).unwrap());
    let store = KnowledgeStore::new();
    let err = store.ingest_document(doc("d", ResourceType::Paper, "body"), &gw).unwrap_err();
    let KnowledgeError::Ingest { transcript, .. } = err else {
        panic!("expected an ingest error, got {err:?}");
    };
    assert_eq!(transcript.len(), 2);
    let archon_core::gateway::TranscriptEntry::Completion { outcome, .. } = &transcript[1] else {
        panic!("expected a completion entry");
    };
    let archon_core::gateway::CompletionOutcome::Error { raw_attempts, .. } = outcome else {
        panic!("expected a failed completion");
    };
    assert_eq!(raw_attempts, &vec!["no json here".to_string(); 3]);
    assert!(store.is_empty());
}

#[test]
fn hash_v1_skip_example() {
    let gw = single_facet_gateway(&[("a", "gcn skip"), ("b", "gcn"), ("c", "pooling")]);
    let store = KnowledgeStore::new().with_weights(WeightTable::uniform(1.0));
    for id in ["a", "b", "c"] {
        store.ingest_document(doc(id, ResourceType::Paper, "text"), &gw).unwrap();
    }
    let v = HashEmbedder::embed_one("gcn skip");
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for (i, x) in v.iter().enumerate() {
        let expected = if i == 7 || i == 8 { h } else { 0.0 };
        assert!((x - expected).abs() < 1e-15, "index {i}: {x}");
    }
    assert!(HashEmbedder::embed_one("").iter().all(|x| *x == 0.0));

    let ranked = store.retrieve(&RetrievalQuery::new("skip", Stage::DataAgent), &gw).unwrap();
    assert_eq!(ranked.ids(), vec!["a/f01", "b/f01", "c/f01"]);
    assert!((ranked.entries[0].cosine_score - h).abs() < 1e-12);
    assert_eq!(ranked.entries[1].cosine_score, 0.0);
    assert_eq!(ranked.entries[2].cosine_score, 0.0);
}

#[test]
fn empty_store_retrieves_nothing() {
    let store = KnowledgeStore::new();
    let gw = gateway(&[]);
    for stage in Stage::ALL {
        let ranked = store.retrieve(&RetrievalQuery::new("anything", *stage), &gw).unwrap();
        assert!(ranked.is_empty());
    }
}

#[test]
fn retrieval_matches_brute_force_on_500_items() {
    let (store, gw) = random_store(7, 500);
    assert_eq!(store.len(), 500);
    let mut rng = SplitMix64::new(99);
    for round in 0..25 {
        let text = random_query(&mut rng);
        let stage = *rng.choose(Stage::ALL);
        let (k, n) = if round % 2 == 0 { (5, 8) } else { (200, 500) };
        let query = RetrievalQuery::new(text.clone(), stage).with_k(k, n);
        let got = store.retrieve(&query, &gw).unwrap();
        let got: Vec<(String, f64)> =
            got.entries.into_iter().map(|e| (e.item_id, e.final_score)).collect();
        assert_eq!(got, oracle_retrieve(&store, &text, stage, k, n), "query {text:?}");
    }
}

#[test]
fn zero_k_is_a_configuration_error() {
    let store = KnowledgeStore::new();
    let q = RetrievalQuery::new("q", Stage::DataAgent).with_k(0, 8);
    assert!(matches!(store.retrieve(&q, &gateway(&[])), Err(KnowledgeError::Config(_))));
}

#[test]
fn post_rank_uniform_keeps_cosine_order_and_ties_by_id() {
    let entry = |id: &str, resource, cosine| RankedEntry {
        item_id: String::from(id),
        doc_id: "d".into(),
        facet_type: FacetType::ArchitectureDesign,
        resource_type: resource,
        text: String::new(),
        cosine_score: cosine,
        final_score: 0.0,
    };
    let ranked = post_rank(
        vec![
            entry("z", ResourceType::Docs, 0.5),
            entry("m", ResourceType::Paper, 0.9),
            entry("a", ResourceType::Leaderboard, 0.5),
        ],
        Stage::PlanningReview,
        8,
        &WeightTable::uniform(1.0),
    )
    .unwrap();
    assert_eq!(ranked.ids(), vec!["m", "a", "z"]);

    let mut partial = WeightTable::from_map(Default::default());
    partial.set(Stage::DataAgent, ResourceType::Paper, 1.0);
    let err = post_rank(vec![entry("x", ResourceType::Paper, 0.4)], Stage::ConfigurationAgent, 8, &partial);
    assert!(matches!(err, Err(KnowledgeError::Config(_))));
}

fn cora_report(run_id: &str, mean: f64) -> ExperimentReport {
    ExperimentReport {
        run_id: run_id.into(),
        plan: TaskPlan {
            task_type: TaskType::NodeClassification,
            dataset: "Cora".into(),
            requested_dataset: "Cora".into(),
            metric: Metric::Accuracy,
            higher_is_better: true,
            budget: Budget {
                max_candidates: 160,
                max_revisions: 2,
                seeds_per_eval: 1,
            },
        },
        best_genotype: EIGHTY.into(),
        metric_mean: mean,
        metric_std: 0.0,
        revisions_used: 0,
        resource: ResourceUsage {
            wall_ms: 1,
            evals: 160,
            token_estimate: 10,
        },
        feature_plan: vec![],
        summary: String::new(),
    }
}

#[test]
fn cora_report_is_retrieved_by_dataset_name() {
    let store = demo_store();
    let gw = gateway(&[]);
    let id = store.upsert_experiment_report(&cora_report("run-a", 0.8710), &gw).unwrap();
    let item = store.item(&id).unwrap();
    assert!(item.text.contains("Cora"));
    assert!(item.text.contains("0.8710"));
    assert_eq!(item.resource_type, ResourceType::ExperimentReport);
    assert_eq!(item.facet_type, FacetType::EvaluationResult);

    let ranked = store
        .retrieve(&RetrievalQuery::new("Cora", Stage::PlanningReview), &gw)
        .unwrap();
    assert_eq!(ranked.entries[0].item_id, id);

    let own = store
        .retrieve_in(&RetrievalQuery::new(item.text.clone(), Stage::PlanningReview), Scope::Experiment, &gw)
        .unwrap();
    assert!((own.entries[0].cosine_score - 1.0).abs() <= 1e-9);

    let prior_only = store
        .retrieve_in(&RetrievalQuery::new("Cora", Stage::PlanningReview), Scope::Prior, &gw)
        .unwrap();
    assert!(!prior_only.ids().contains(&id.as_str()));
}

#[test]
fn two_reports_grow_the_experiment_base_by_two() {
    let store = KnowledgeStore::new();
    let gw = gateway(&[]);
    store.upsert_experiment_report(&cora_report("run-a", 0.8710), &gw).unwrap();
    store.upsert_experiment_report(&cora_report("run-b", 0.85), &gw).unwrap();
    assert_eq!(store.experiment_count(), 2);
    let dup = store.upsert_experiment_report(&cora_report("run-b", 0.85), &gw);
    assert!(matches!(dup, Err(KnowledgeError::Duplicate { .. })));
}

#[test]
fn invalid_report_is_rejected() {
    let store = KnowledgeStore::new();
    let mut report = cora_report("", 0.5);
    report.best_genotype = "nonsense".into();
    let err = store.upsert_experiment_report(&report, &gateway(&[])).unwrap_err();
    let KnowledgeError::Validation(problems) = err else { panic!("{err:?}") };
    assert_eq!(problems.len(), 2, "{problems:?}");
    assert!(store.is_empty());
}

#[test]
fn snapshot_round_trip_preserves_retrieval() {
    let empty = KnowledgeStore::new();
    let back = KnowledgeStore::snapshot_from_str(&empty.snapshot_string()).unwrap();
    assert!(back.is_empty());

    let (store, gw) = random_store(11, 100);
    store.upsert_experiment_report(&cora_report("run-a", 0.8710), &gw).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kb.snapshot");
    store.snapshot_save(&path).unwrap();
    let loaded = KnowledgeStore::snapshot_load(&path).unwrap();
    assert_eq!(loaded.snapshot_string(), store.snapshot_string());
    assert_eq!(loaded.items(), store.items());
    assert_eq!(loaded.documents(), store.documents());

    let mut rng = SplitMix64::new(3);
    for _ in 0..20 {
        let q = RetrievalQuery::new(random_query(&mut rng), *rng.choose(Stage::ALL));
        assert_eq!(store.retrieve(&q, &gw).unwrap(), loaded.retrieve(&q, &gw).unwrap());
    }
}

#[test]
fn truncated_snapshot_is_refused_with_offset() {
    let store = demo_store();
    let text = store.snapshot_string();
    for cut in [text.len() / 3, text.len() / 2, text.len() - 2] {
        let mut cut = cut;
        while !text.is_char_boundary(cut) {
            cut -= 1;
        }
        let err = KnowledgeStore::snapshot_from_str(&text[..cut]).unwrap_err();
        assert!(err.offset <= cut, "{err}");
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.snapshot");
    std::fs::write(&path, &text[..text.len() / 2]).unwrap();
    assert!(matches!(KnowledgeStore::snapshot_load(&path), Err(KnowledgeError::Load(_))));
    assert!(KnowledgeStore::snapshot_from_str("").is_err());
    assert!(KnowledgeStore::snapshot_from_str("archon-kb v2 dim=none embedder=none\n").is_err());
}
