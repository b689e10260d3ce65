use std::collections::BTreeMap;
use std::sync::RwLock;

use serde_json::json;

use super::rank::{post_rank, top_per_type};
use super::types::*;
use super::KnowledgeError;
use crate::agents::ExperimentReport;
use crate::gateway::schema::{DocSummary, FacetList, Reranking};
use crate::gateway::{cosine, truncate_chars, Gateway, GatewayError, PromptEnvelope, TemplateId};

/// Longest facet text kept in the store, in characters.
pub const MAX_FACET_CHARS: usize = 512;

#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct StoreData {
    pub dim: Option<usize>,
    pub embedder: Option<String>,
    pub docs: BTreeMap<String, SourceDocument>,
    pub summaries: BTreeMap<String, CoarseSummary>,
    pub items: Vec<KnowledgeItem>,
}

/// Prior and experiment knowledge bases in one index.
///
/// Items whose resource type is `experiment-report` form the experiment
/// knowledge base; everything else is prior knowledge. Reads may run
/// concurrently; writes are prepared outside the lock and committed whole.
#[derive(Debug, Default)]
pub struct KnowledgeStore {
    pub(crate) data: RwLock<StoreData>,
    weights: WeightTable,
}

pub fn facet_item_id(doc_id: &str, index: usize) -> String {
    format!("{doc_id}/f{index:02}")
}

impl KnowledgeStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_weights(mut self, weights: WeightTable) -> Self {
        self.weights = weights;
        self
    }

    pub fn weights(&self) -> &WeightTable {
        &self.weights
    }

    pub(crate) fn from_data(data: StoreData) -> Self {
        Self {
            data: RwLock::new(data),
            weights: WeightTable::default(),
        }
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, StoreData> {
        self.data.read().expect("knowledge store lock poisoned")
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, StoreData> {
        self.data.write().expect("knowledge store lock poisoned")
    }

    pub fn len(&self) -> usize {
        self.read().items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> Option<usize> {
        self.read().dim
    }

    pub fn embedder_name(&self) -> Option<String> {
        self.read().embedder.clone()
    }

    pub fn experiment_count(&self) -> usize {
        self.count_in(Scope::Experiment)
    }

    pub fn prior_count(&self) -> usize {
        self.count_in(Scope::Prior)
    }

    fn count_in(&self, scope: Scope) -> usize {
        self.read()
            .items
            .iter()
            .filter(|i| scope.admits(i.resource_type))
            .count()
    }

    pub fn items(&self) -> Vec<KnowledgeItem> {
        self.read().items.clone()
    }

    pub fn item(&self, item_id: &str) -> Option<KnowledgeItem> {
        self.read().items.iter().find(|i| i.item_id == item_id).cloned()
    }

    pub fn contains_item(&self, item_id: &str) -> bool {
        self.read().items.iter().any(|i| i.item_id == item_id)
    }

    pub fn document(&self, doc_id: &str) -> Option<SourceDocument> {
        self.read().docs.get(doc_id).cloned()
    }

    pub fn summary(&self, doc_id: &str) -> Option<CoarseSummary> {
        self.read().summaries.get(doc_id).cloned()
    }

    pub fn documents(&self) -> Vec<SourceDocument> {
        self.read().docs.values().cloned().collect()
    }

    /// Two-level extraction: a coarse summary of the document, then typed
    /// facets drawn from it. Facets are embedded and indexed; the summary is
    /// kept as provenance only. Returns the new item ids in creation order.
    pub fn ingest_document(
        &self,
        doc: SourceDocument,
        gateway: &Gateway,
    ) -> Result<Vec<String>, KnowledgeError> {
        if doc.doc_id.trim().is_empty() {
            return Err(KnowledgeError::InvalidDocument("doc_id is empty".into()));
        }
        if doc.body.trim().is_empty() {
            return Err(KnowledgeError::InvalidDocument(format!(
                "document {} has an empty body",
                doc.doc_id
            )));
        }
        if self.read().docs.contains_key(&doc.doc_id) {
            return Err(KnowledgeError::Duplicate { doc_id: doc.doc_id });
        }

        let mark = gateway.transcript().len();
        let fail = |e: GatewayError| KnowledgeError::Ingest {
            doc_id: doc.doc_id.clone(),
            message: e.to_string(),
            transcript: gateway.transcript().since(mark),
        };

        let summary_env = PromptEnvelope::new(TemplateId::SummarizeDoc)
            .slot("doc_id", doc.doc_id.as_str())
            .slot("resource_type", doc.resource_type.as_str())
            .slot("title", doc.title.as_str())
            .slot("body", doc.body.as_str());
        let summary: DocSummary = gateway
            .complete(&summary_env)
            .and_then(|r| r.parse().map_err(GatewayError::from))
            .map_err(fail)?;

        let facet_env = PromptEnvelope::new(TemplateId::ExtractFacets)
            .slot("doc_id", doc.doc_id.as_str())
            .slot("title", doc.title.as_str())
            .slot("summary", summary.summary.as_str())
            .slot("problem", summary.problem.as_str())
            .slot("approach", summary.approach.as_str())
            .slot("body", doc.body.as_str());
        let facets: FacetList = gateway
            .complete(&facet_env)
            .and_then(|r| r.parse().map_err(GatewayError::from))
            .map_err(fail)?;

        let texts: Vec<String> = facets
            .facets
            .iter()
            .map(|f| truncate_chars(f.text.trim(), MAX_FACET_CHARS))
            .collect();
        let embeddings = gateway.embed(&texts).map_err(fail)?;

        let items: Vec<KnowledgeItem> = facets
            .facets
            .iter()
            .zip(texts)
            .zip(embeddings)
            .enumerate()
            .map(|(i, ((facet, text), embedding))| KnowledgeItem {
                item_id: facet_item_id(&doc.doc_id, i + 1),
                doc_id: doc.doc_id.clone(),
                facet_type: facet.facet_type,
                resource_type: doc.resource_type,
                text,
                embedding,
            })
            .collect();
        let coarse = CoarseSummary {
            doc_id: doc.doc_id.clone(),
            problem: summary.problem,
            approach: summary.approach,
            summary: summary.summary,
        };
        self.commit(doc, Some(coarse), items, gateway.embedder_name())
    }

    /// Stores a compiled run report in the experiment knowledge base.
    pub fn upsert_experiment_report(
        &self,
        report: &ExperimentReport,
        gateway: &Gateway,
    ) -> Result<String, KnowledgeError> {
        let problems = report.problems();
        if !problems.is_empty() {
            return Err(KnowledgeError::Validation(problems));
        }
        let text = truncate_chars(&report.knowledge_text(), MAX_FACET_CHARS);
        let embedding = gateway
            .embed(std::slice::from_ref(&text))?
            .pop()
            .unwrap_or_default();
        let doc = SourceDocument {
            doc_id: report.run_id.clone(),
            resource_type: ResourceType::ExperimentReport,
            title: format!("experiment report {}", report.run_id),
            body: serde_json::to_string(report).expect("report serializes"),
            origin: "pipeline run".into(),
        };
        let item = KnowledgeItem {
            item_id: facet_item_id(&report.run_id, 1),
            doc_id: report.run_id.clone(),
            facet_type: FacetType::EvaluationResult,
            resource_type: ResourceType::ExperimentReport,
            text,
            embedding,
        };
        let ids = self.commit(doc, None, vec![item], gateway.embedder_name())?;
        Ok(ids.into_iter().next().expect("one item committed"))
    }

    fn commit(
        &self,
        doc: SourceDocument,
        summary: Option<CoarseSummary>,
        items: Vec<KnowledgeItem>,
        embedder: &str,
    ) -> Result<Vec<String>, KnowledgeError> {
        let mut data = self.write();
        if data.docs.contains_key(&doc.doc_id) {
            return Err(KnowledgeError::Duplicate { doc_id: doc.doc_id });
        }
        let dim = items.first().map(|i| i.embedding.len());
        if let (Some(expected), Some(found)) = (data.dim, dim) {
            if let Some(bad) = items.iter().find(|i| i.embedding.len() != expected) {
                return Err(KnowledgeError::DimensionMismatch {
                    expected,
                    found: bad.embedding.len(),
                });
            }
            debug_assert_eq!(expected, found);
        }
        if data.dim.is_none() {
            data.dim = dim;
            data.embedder = Some(embedder.to_string());
        }
        let ids = items.iter().map(|i| i.item_id.clone()).collect();
        if let Some(s) = summary {
            data.summaries.insert(s.doc_id.clone(), s);
        }
        data.docs.insert(doc.doc_id.clone(), doc);
        data.items.extend(items);
        Ok(ids)
    }

    /// Goal-aware retrieval over both knowledge bases.
    pub fn retrieve(
        &self,
        query: &RetrievalQuery,
        gateway: &Gateway,
    ) -> Result<RankedKnowledge, KnowledgeError> {
        self.retrieve_in(query, Scope::All, gateway)
    }

    /// Embeds the query, keeps the `per_type_k` most similar items of each
    /// resource type within `scope`, then post-ranks the union with the
    /// stage weights and keeps `final_k`.
    pub fn retrieve_in(
        &self,
        query: &RetrievalQuery,
        scope: Scope,
        gateway: &Gateway,
    ) -> Result<RankedKnowledge, KnowledgeError> {
        if query.per_type_k == 0 || query.final_k == 0 {
            return Err(KnowledgeError::Config("per_type_k and final_k must be >= 1".into()));
        }
        let query_vec = gateway
            .embed(std::slice::from_ref(&query.query_text))?
            .pop()
            .unwrap_or_default();
        self.rank_with_vector(&query_vec, query, scope)
    }

    /// Retrieval given an already-embedded query.
    pub fn rank_with_vector(
        &self,
        query_vec: &[f64],
        query: &RetrievalQuery,
        scope: Scope,
    ) -> Result<RankedKnowledge, KnowledgeError> {
        let data = self.read();
        let candidates = data
            .items
            .iter()
            .filter(|item| scope.admits(item.resource_type))
            .map(|item| RankedEntry {
                item_id: item.item_id.clone(),
                doc_id: item.doc_id.clone(),
                facet_type: item.facet_type,
                resource_type: item.resource_type,
                text: item.text.clone(),
                cosine_score: cosine(query_vec, &item.embedding),
                final_score: 0.0,
            });
        let kept = top_per_type(candidates, query.per_type_k);
        drop(data);
        post_rank(kept, query.stage, query.final_k, &self.weights)
    }

    /// Lets the completion model reorder (and prune) a post-ranked list. The
    /// result never exceeds `final_k` and only contains ids from `ranked`.
    pub fn llm_rerank(
        &self,
        ranked: RankedKnowledge,
        query: &RetrievalQuery,
        gateway: &Gateway,
    ) -> Result<RankedKnowledge, KnowledgeError> {
        if ranked.is_empty() {
            return Ok(ranked);
        }
        let mut env = PromptEnvelope::new(TemplateId::RerankKnowledge)
            .slot("query", query.query_text.as_str())
            .slot("stage", query.stage.as_str())
            .slot("final_k", query.final_k.to_string());
        for entry in &ranked.entries {
            env = env.inject(entry.item_id.as_str(), &entry.text);
        }
        let order: Reranking = gateway.complete(&env)?.parse().map_err(GatewayError::from)?;
        let mut by_id: BTreeMap<String, RankedEntry> = ranked
            .entries
            .into_iter()
            .map(|e| (e.item_id.clone(), e))
            .collect();
        let entries = order
            .ranking
            .iter()
            .filter_map(|id| by_id.remove(id))
            .take(query.final_k)
            .collect();
        Ok(RankedKnowledge { entries })
    }

    /// Compact JSON description used by the CLI summary output.
    pub fn stats(&self) -> serde_json::Value {
        let data = self.read();
        json!({
            "documents": data.docs.len(),
            "items": data.items.len(),
            "experiment_reports": data.items.iter().filter(|i| i.resource_type == ResourceType::ExperimentReport).count(),
            "dim": data.dim,
        })
    }
}
