#![allow(dead_code)]

use std::path::{Path, PathBuf};

use archon_core::agents::{Agents, PipelineSettings, PlanDefaults, ProgressEvent, RunResult};
use archon_core::eval::EvalBackend;
use archon_core::gateway::{Gateway, ScriptedProvider};
use archon_core::knowledge::{
    load_documents, read_manifest, FacetType, KnowledgeStore, ResourceType, SourceDocument, Stage,
};
use archon_core::rng::SplitMix64;

pub const FIGURE2_INSTRUCTION: &str = "predict the category of articles within a citation network";

pub const EIGHTY: &str = "v1;ops=gcn,gcn;dim=64;act=relu;drop=0.50;skips=0-2;pool=none;lr=0.005;wd=0.0005;ep=200";

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn demo() -> PathBuf {
    fixtures().join("demo")
}

/// Scripted gateway over the named files in the demo fixture directory.
pub fn gateway(files: &[&str]) -> Gateway {
    let mut provider = ScriptedProvider::default();
    for file in files {
        provider.extend(ScriptedProvider::from_file(&demo().join(file)).expect("fixture loads"));
    }
    Gateway::scripted(provider)
}

/// Ingests the three-document demo corpus into `store`.
pub fn ingest_demo(store: &KnowledgeStore, gateway: &Gateway) -> Vec<String> {
    let corpus = demo().join("corpus");
    let entries = read_manifest(&corpus.join("manifest.jsonl")).expect("manifest reads");
    let docs = load_documents(&entries, &corpus).expect("documents load");
    let mut ids = Vec::new();
    for doc in docs {
        ids.extend(store.ingest_document(doc, gateway).expect("ingest succeeds"));
    }
    ids
}

pub fn demo_store() -> KnowledgeStore {
    let store = KnowledgeStore::new();
    ingest_demo(&store, &gateway(&["ingest.jsonl"]));
    store
}

pub fn surrogate() -> EvalBackend {
    EvalBackend::surrogate(0.0)
}

pub fn demo_defaults() -> PlanDefaults {
    PlanDefaults {
        dataset_map: [("Cora".to_string(), "toy-cora".to_string())].into(),
        ..PlanDefaults::default()
    }
}

/// Runs the Figure 2 instruction against `store` with the named scripts.
pub fn run_demo(store: &KnowledgeStore, files: &[&str], seed: u64) -> (RunResult, Vec<ProgressEvent>) {
    let gw = gateway(files);
    let backend = surrogate();
    let agents = Agents::new(&gw, store, &backend).with_defaults(demo_defaults());
    let settings = PipelineSettings {
        seed,
        ..PipelineSettings::default()
    };
    let mut seen = Vec::new();
    let result = agents
        .run_pipeline(FIGURE2_INSTRUCTION, &settings, &mut |e| seen.push(e.clone()))
        .expect("pipeline completes");
    (result, seen)
}

pub fn golden(name: &str) -> PathBuf {
    fixtures().join("protocol").join(name)
}

pub fn stub_worker() -> &'static str {
    env!("CARGO_BIN_EXE_archon-stub-worker")
}

const VOCAB: &[&str] = &[
    "gcn", "gat", "sage", "gin", "skip", "pooling", "dropout", "cora", "citation", "graph",
    "node", "molecule", "attention", "residual", "normalize", "degree", "adjacency", "mean",
    "sum", "layers",
];

fn random_text(rng: &mut SplitMix64) -> String {
    let n = 1 + rng.below(5);
    (0..n).map(|_| *rng.choose(VOCAB)).collect::<Vec<_>>().join(" ")
}

pub fn random_query(rng: &mut SplitMix64) -> String {
    random_text(rng)
}

/// A store of `items` hash-v1 facets spread over random documents of every
/// prior resource type. Small vocabulary, so cosine ties are common.
pub fn random_store(seed: u64, items: usize) -> (KnowledgeStore, Gateway) {
    let mut rng = SplitMix64::new(seed);
    let resources = [ResourceType::Paper, ResourceType::Docs, ResourceType::Leaderboard];
    let facet_types = FacetType::ALL;
    let mut fixture = String::new();
    let mut docs = Vec::new();
    let mut made = 0;
    while made < items {
        let doc_id = format!("doc{:03}", docs.len());
        let count = (1 + rng.below(6)).min(items - made);
        made += count;
        let facets: Vec<serde_json::Value> = (0..count)
            .map(|_| {
                serde_json::json!({
                    "facet_type": rng.choose(facet_types).as_str(),
                    "text": random_text(&mut rng),
                })
            })
            .collect();
        let summary = serde_json::json!({"template_id": "summarize-doc", "match": {"doc_id": doc_id},
            "payload": {"problem": "p", "approach": "a", "summary": "s"}});
        let extract = serde_json::json!({"template_id": "extract-facets", "match": {"doc_id": doc_id},
            "payload": {"facets": facets}});
        fixture.push_str(&format!("{summary}\n{extract}\n"));
        docs.push(SourceDocument {
            doc_id,
            resource_type: *rng.choose(&resources),
            title: "random".into(),
            body: "random body".into(),
            origin: "generated".into(),
        });
    }
    let gateway = Gateway::scripted(ScriptedProvider::from_jsonl(&fixture).expect("fixture parses"));
    let store = KnowledgeStore::new();
    for doc in docs {
        store.ingest_document(doc, &gateway).expect("ingest succeeds");
    }
    (store, gateway)
}

/// Independent hash-v1: byte-sum of each lowercase token mod 16, normalized.
pub fn oracle_embed(text: &str) -> Vec<f64> {
    let mut v = [0.0f64; 16];
    for token in text.to_lowercase().split_whitespace() {
        let sum: u32 = token.bytes().map(u32::from).sum();
        v[(sum % 16) as usize] += 1.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v.to_vec()
}

fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na * nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Brute force: score every item, sort each resource type, keep the head of
/// each, weight, sort the union, truncate. Returns (item_id, final_score).
pub fn oracle_retrieve(
    store: &KnowledgeStore,
    query: &str,
    stage: Stage,
    per_type_k: usize,
    final_k: usize,
) -> Vec<(String, f64)> {
    let q = oracle_embed(query);
    let mut by_type: std::collections::BTreeMap<ResourceType, Vec<(f64, String)>> = Default::default();
    for item in store.items() {
        by_type
            .entry(item.resource_type)
            .or_default()
            .push((oracle_cosine(&q, &item.embedding), item.item_id));
    }
    let mut union = Vec::new();
    for (resource, mut scored) in by_type {
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let weight = store.weights().weight(stage, resource).unwrap();
        union.extend(scored.into_iter().take(per_type_k).map(|(c, id)| (id, c * weight)));
    }
    union.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    union.truncate(final_k);
    union
}
