//! The individual agents. Each one retrieves its knowledge, fills a prompt
//! template and turns the validated reply into a typed plan.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::types::*;
use crate::arch::{encode, seed_from_knowledge, validate, ArchGenotype, SearchSpace, SearchTrace};
use crate::eval::{EvalBackend, EvalRequest, GraphProfile};
use crate::gateway::schema::{
    Algorithm, Budget, DecisionDraft, FeaturePlanDraft, Hint, ReportSummary, SearchConfigDraft,
    TaskPlanDraft, Verdict,
};
use crate::gateway::{Gateway, PromptEnvelope, TemplateId};
use crate::knowledge::{KnowledgeStore, RankedKnowledge, RetrievalQuery, Scope, Stage};

/// Values used when the model leaves a field out, plus the mapping from
/// user-facing dataset names to registry names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDefaults {
    pub budget: Budget,
    pub population: usize,
    pub generations: usize,
    #[serde(default)]
    pub dataset_map: BTreeMap<String, String>,
}

impl Default for PlanDefaults {
    fn default() -> Self {
        Self {
            budget: Budget {
                max_candidates: 160,
                max_revisions: 2,
                seeds_per_eval: 1,
            },
            population: 16,
            generations: 10,
            dataset_map: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalSettings {
    pub per_type_k: usize,
    pub final_k: usize,
    /// Let the completion model reorder each post-ranked list.
    #[serde(default)]
    pub llm_rerank: bool,
}

impl Default for RetrievalSettings {
    fn default() -> Self {
        Self {
            per_type_k: 5,
            final_k: 8,
            llm_rerank: false,
        }
    }
}

/// Shared handles every agent works with.
pub struct Agents<'a> {
    pub gateway: &'a Gateway,
    pub store: &'a KnowledgeStore,
    pub backend: &'a EvalBackend,
    pub defaults: PlanDefaults,
    pub retrieval: RetrievalSettings,
}

fn profile_text(profile: &GraphProfile) -> String {
    format!(
        "nodes={} edges={} features={} classes={} homophily={:.2}",
        profile.num_nodes, profile.num_edges, profile.feature_dim, profile.num_classes, profile.homophily_estimate
    )
}

fn with_knowledge(mut env: PromptEnvelope, ranked: &RankedKnowledge) -> PromptEnvelope {
    for entry in &ranked.entries {
        env = env.inject(entry.item_id.as_str(), &entry.text);
    }
    env
}

impl<'a> Agents<'a> {
    pub fn new(gateway: &'a Gateway, store: &'a KnowledgeStore, backend: &'a EvalBackend) -> Self {
        Self {
            gateway,
            store,
            backend,
            defaults: PlanDefaults::default(),
            retrieval: RetrievalSettings::default(),
        }
    }

    pub fn with_defaults(mut self, defaults: PlanDefaults) -> Self {
        self.defaults = defaults;
        self
    }

    pub fn with_retrieval(mut self, retrieval: RetrievalSettings) -> Self {
        self.retrieval = retrieval;
        self
    }

    fn retrieve(&self, text: String, stage: Stage, scope: Scope) -> Result<RankedKnowledge, String> {
        let query = RetrievalQuery::new(text, stage).with_k(self.retrieval.per_type_k, self.retrieval.final_k);
        let ranked = self
            .store
            .retrieve_in(&query, scope, self.gateway)
            .map_err(|e| knowledge_message(&e))?;
        if self.retrieval.llm_rerank {
            self.store
                .llm_rerank(ranked, &query, self.gateway)
                .map_err(|e| knowledge_message(&e))
        } else {
            Ok(ranked)
        }
    }

    /// Interprets the instruction as a task plan.
    pub fn plan(&self, instruction: &str) -> Result<TaskPlan, AgentError> {
        if instruction.trim().is_empty() {
            return Err(AgentError::Plan("instruction is empty".into()));
        }
        let env = PromptEnvelope::new(TemplateId::MakeTaskPlan).slot("instruction", instruction.trim());
        let draft: TaskPlanDraft = self
            .gateway
            .complete(&env)
            .and_then(|r| r.parse().map_err(Into::into))
            .map_err(|e| AgentError::Plan(gateway_message(&e)))?;
        let requested = draft.dataset.trim().to_string();
        let dataset = self
            .defaults
            .dataset_map
            .get(&requested)
            .cloned()
            .unwrap_or_else(|| requested.clone());
        let plan = TaskPlan {
            task_type: draft.task_type,
            dataset,
            requested_dataset: requested,
            metric: draft.metric,
            higher_is_better: draft.higher_is_better.unwrap_or(draft.metric.higher_is_better()),
            budget: draft.budget.unwrap_or(self.defaults.budget),
        };
        let problems = plan.problems();
        if !problems.is_empty() {
            return Err(AgentError::Plan(problems.join("; ")));
        }
        Ok(plan)
    }

    /// Looks up the dataset profile and checks it fits the plan.
    pub fn profile(&self, plan: &TaskPlan) -> Result<GraphProfile, AgentError> {
        let profile = self.backend.graph_profile(&plan.dataset).map_err(AgentError::Profile)?;
        if profile.task_type() != plan.task_type {
            return Err(AgentError::Profile(crate::eval::EvalError::InvalidRequest(format!(
                "dataset {} is a {} dataset, the plan asks for {}",
                plan.dataset,
                profile.task_type(),
                plan.task_type
            ))));
        }
        Ok(profile)
    }

    /// The data agent: picks feature directives from retrieved knowledge.
    pub fn propose_features(
        &self,
        plan: &TaskPlan,
        profile: &GraphProfile,
        hint: Option<Hint>,
    ) -> Result<FeaturePlan, AgentError> {
        let ranked = self
            .retrieve(
                format!("{} {} {} features", plan.task_type, plan.dataset, profile.kind),
                Stage::DataAgent,
                Scope::All,
            )
            .map_err(AgentError::Features)?;
        let hint_text = match hint {
            Some(Hint::AdjustFeatures) => "adjust-features: the previous feature plan underperformed",
            _ => "none",
        };
        let env = with_knowledge(
            PromptEnvelope::new(TemplateId::MakeFeaturePlan)
                .slot("task_type", plan.task_type.as_str())
                .slot("dataset", plan.dataset.as_str())
                .slot("profile", profile_text(profile))
                .slot("kind", profile.kind.as_str())
                .slot("hint", hint_text),
            &ranked,
        );
        let draft: FeaturePlanDraft = self
            .gateway
            .complete(&env)
            .and_then(|r| r.parse().map_err(Into::into))
            .map_err(|e| AgentError::Features(gateway_message(&e)))?;
        Ok(FeaturePlan {
            directives: draft.directives,
            citations: draft.citations,
        })
    }

    /// The configuration agent: search space, algorithm and knowledge seeds.
    pub fn configure_search(&self, plan: &TaskPlan, profile: &GraphProfile) -> Result<SearchConfig, AgentError> {
        let ranked = self
            .retrieve(
                format!("{} {} {} architecture", plan.task_type, plan.dataset, profile.kind),
                Stage::ConfigurationAgent,
                Scope::All,
            )
            .map_err(AgentError::Configure)?;
        let env = with_knowledge(
            PromptEnvelope::new(TemplateId::MakeSearchConfig)
                .slot("task_type", plan.task_type.as_str())
                .slot("dataset", plan.dataset.as_str())
                .slot("profile", profile_text(profile))
                .slot("kind", profile.kind.as_str())
                .slot("population", self.defaults.population.to_string())
                .slot("generations", self.defaults.generations.to_string()),
            &ranked,
        );
        let draft: SearchConfigDraft = self
            .gateway
            .complete(&env)
            .and_then(|r| r.parse().map_err(Into::into))
            .map_err(|e| AgentError::Configure(gateway_message(&e)))?;
        let space = SearchSpace {
            allowed_ops: draft.allowed_ops,
            max_layers: draft.max_layers,
            allowed_dims: draft.allowed_dims,
            allow_skips: draft.allow_skips,
            ..SearchSpace::full(plan.task_type)
        };
        let problems = space.problems();
        if !problems.is_empty() {
            return Err(AgentError::Configure(problems.join("; ")));
        }
        let population = draft.population.unwrap_or(self.defaults.population);
        if population < 2 {
            return Err(AgentError::Configure("population must be at least 2".into()));
        }
        let cap = plan.budget.max_candidates;
        let mut generations = draft.generations.unwrap_or(self.defaults.generations).max(1);
        if population * generations > cap {
            generations = (cap / population).max(1);
        }
        let samples = draft.samples.unwrap_or(population * generations).min(cap).max(1);
        let mut seen = HashSet::new();
        let seed_genotypes: Vec<ArchGenotype> = seed_from_knowledge(&ranked, &space)
            .into_iter()
            .filter(|g| validate(g, plan.task_type, &space).is_empty())
            .filter(|g| seen.insert(encode(g)))
            .collect();
        Ok(SearchConfig {
            space,
            algorithm: draft.algorithm,
            population,
            generations,
            samples,
            seed_genotypes,
            citations: draft.citations,
        })
    }

    /// The planning agent's review of a finished search. The revision budget
    /// is enforced after the model answers.
    pub fn review(&self, trace: &SearchTrace, plan: &TaskPlan, revisions_used: usize) -> Result<Decision, AgentError> {
        let best = trace
            .best()
            .ok_or_else(|| AgentError::Review("search produced no candidates".into()))?;
        let mut ranked = self
            .retrieve(
                format!("{} {} experiment", plan.dataset, plan.task_type),
                Stage::PlanningReview,
                Scope::Experiment,
            )
            .map_err(AgentError::Review)?;
        ranked
            .entries
            .retain(|e| e.text.split_whitespace().any(|w| w == plan.dataset));
        let env = with_knowledge(
            PromptEnvelope::new(TemplateId::ReviewResults)
                .slot("task_type", plan.task_type.as_str())
                .slot("dataset", plan.dataset.as_str())
                .slot("metric", plan.metric.as_str())
                .slot("best_score", format!("{:.4}", best.score))
                .slot("best_genotype", encode(&best.genotype))
                .slot("evals_used", trace.evals_used.to_string())
                .slot("revisions_used", revisions_used.to_string())
                .slot("max_revisions", plan.budget.max_revisions.to_string()),
            &ranked,
        );
        let draft: DecisionDraft = self
            .gateway
            .complete(&env)
            .and_then(|r| r.parse().map_err(Into::into))
            .map_err(|e| AgentError::Review(gateway_message(&e)))?;
        let consulted = ranked.entries.iter().map(|e| e.item_id.clone()).collect();
        if draft.verdict == Verdict::Revise && revisions_used >= plan.budget.max_revisions {
            return Ok(Decision {
                verdict: Verdict::Accept,
                hints: Vec::new(),
                rationale: format!("revision budget of {} exhausted; {}", plan.budget.max_revisions, draft.rationale),
                forced: true,
                consulted,
            });
        }
        Ok(Decision {
            verdict: draft.verdict,
            hints: if draft.verdict == Verdict::Accept { Vec::new() } else { draft.hints },
            rationale: draft.rationale,
            forced: false,
            consulted,
        })
    }

    /// Asks the model for a short narrative of a finished run.
    pub fn summarize_report(&self, report: &ExperimentReport) -> Result<String, AgentError> {
        let env = PromptEnvelope::new(TemplateId::CompileReport)
            .slot("run_id", report.run_id.as_str())
            .slot("task_type", report.plan.task_type.as_str())
            .slot("dataset", report.plan.dataset.as_str())
            .slot("best_genotype", report.best_genotype.as_str())
            .slot("metric", report.plan.metric.as_str())
            .slot("metric_mean", format!("{:.4}", report.metric_mean))
            .slot("metric_std", format!("{:.4}", report.metric_std))
            .slot("revisions_used", report.revisions_used.to_string());
        let summary: ReportSummary = self
            .gateway
            .complete(&env)
            .and_then(|r| r.parse().map_err(Into::into))
            .map_err(|e| AgentError::Report(gateway_message(&e)))?;
        Ok(summary.summary)
    }

    /// Final multi-seed evaluation of the chosen genotype.
    pub fn final_evaluation(
        &self,
        plan: &TaskPlan,
        genotype: &ArchGenotype,
        features: &FeaturePlan,
        search_score: f64,
    ) -> (f64, f64) {
        let req = EvalRequest::new(genotype, &features.directives, &plan.dataset, &plan.eval_seeds());
        match self.backend.evaluate(&req) {
            Ok(result) => (result.metric_mean, result.metric_std),
            Err(_) => (search_score, 0.0),
        }
    }

    /// Stores a report in the experiment knowledge base.
    pub fn store_report(&self, report: &ExperimentReport) -> Result<String, AgentError> {
        self.store
            .upsert_experiment_report(report, self.gateway)
            .map_err(|e| AgentError::Report(knowledge_message(&e)))
    }
}

/// Operator priority used when a reviewer asks to widen the space.
pub const WIDEN_PRIORITY: [crate::arch::Op; 6] = [
    crate::arch::Op::Gcn,
    crate::arch::Op::Gat,
    crate::arch::Op::Sage,
    crate::arch::Op::Gin,
    crate::arch::Op::Cheb,
    crate::arch::Op::Linear,
];

/// Applies the structural hints to a copy of `config`. Feature hints are
/// handled by the caller, which re-runs the data agent.
pub fn apply_hints(config: &SearchConfig, hints: &[Hint]) -> SearchConfig {
    let mut next = config.clone();
    for hint in hints {
        match hint {
            Hint::WidenOps => {
                if let Some(op) = WIDEN_PRIORITY.iter().find(|op| !next.space.allowed_ops.contains(op)) {
                    next.space.allowed_ops.push(*op);
                }
            }
            Hint::IncreaseGenerations => match next.algorithm {
                Algorithm::Evolutionary => next.generations = next.generations * 3 / 2 + next.generations % 2,
                Algorithm::Random => next.samples = next.samples * 3 / 2 + next.samples % 2,
            },
            Hint::AdjustFeatures => {}
        }
    }
    next
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{Op, TaskType};

    fn config() -> SearchConfig {
        SearchConfig {
            space: SearchSpace {
                allowed_ops: vec![Op::Sage, Op::Linear],
                ..SearchSpace::full(TaskType::NodeClassification)
            },
            algorithm: Algorithm::Evolutionary,
            population: 16,
            generations: 3,
            samples: 48,
            seed_genotypes: vec![],
            citations: vec![],
        }
    }

    #[test]
    fn widen_ops_follows_priority() {
        let next = apply_hints(&config(), &[Hint::WidenOps]);
        assert_eq!(next.space.allowed_ops, vec![Op::Sage, Op::Linear, Op::Gcn]);
        let again = apply_hints(&next, &[Hint::WidenOps]);
        assert_eq!(again.space.allowed_ops.last(), Some(&Op::Gat));
        let mut full = config();
        full.space.allowed_ops = Op::ALL.to_vec();
        assert_eq!(apply_hints(&full, &[Hint::WidenOps]).space.allowed_ops.len(), 6);
    }

    #[test]
    fn generations_grow_by_half_rounded_up() {
        for (g, expected) in [(1, 2), (2, 3), (3, 5), (10, 15), (11, 17)] {
            let mut c = config();
            c.generations = g;
            assert_eq!(apply_hints(&c, &[Hint::IncreaseGenerations]).generations, expected);
            assert_eq!(expected, (g as f64 * 1.5).ceil() as usize);
        }
    }
}
