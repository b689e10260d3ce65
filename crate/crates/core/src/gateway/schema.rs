//! Output schemas, one per template. A payload is valid when it deserializes
//! into the template's type and passes the extra checks in [`validate_payload`].

use std::collections::HashSet;
use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::envelope::{PromptEnvelope, TemplateId};
use crate::arch::{Op, TaskType, DIMS, MAX_LAYERS};
use crate::eval::Directive;
use crate::knowledge::FacetType;

pub const MAX_FACETS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Accuracy,
    Rocauc,
    Rmse,
}

impl Metric {
    pub fn higher_is_better(self) -> bool {
        !matches!(self, Metric::Rmse)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Rocauc => "rocauc",
            Metric::Rmse => "rmse",
        }
    }

    /// Metrics that make sense for a task type.
    pub fn allowed_for(task: TaskType) -> &'static [Metric] {
        match task {
            TaskType::NodeClassification => &[Metric::Accuracy, Metric::Rocauc],
            TaskType::GraphClassification => &[Metric::Accuracy, Metric::Rocauc, Metric::Rmse],
            TaskType::LinkRanking => &[Metric::Rocauc],
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Accept,
    Revise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hint {
    WidenOps,
    IncreaseGenerations,
    AdjustFeatures,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Random,
    Evolutionary,
}

macro_rules! display_as {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $name {
            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

display_as!(Verdict { Accept => "accept", Revise => "revise" });
display_as!(Hint {
    WidenOps => "widen-ops",
    IncreaseGenerations => "increase-generations",
    AdjustFeatures => "adjust-features",
});
display_as!(Algorithm { Random => "random", Evolutionary => "evolutionary" });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub max_candidates: usize,
    pub max_revisions: usize,
    pub seeds_per_eval: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocSummary {
    pub problem: String,
    pub approach: String,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacetDraft {
    pub facet_type: FacetType,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacetList {
    pub facets: Vec<FacetDraft>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPlanDraft {
    pub task_type: TaskType,
    pub dataset: String,
    pub metric: Metric,
    #[serde(default)]
    pub higher_is_better: Option<bool>,
    #[serde(default)]
    pub budget: Option<Budget>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePlanDraft {
    pub directives: Vec<Directive>,
    #[serde(default)]
    pub citations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfigDraft {
    pub allowed_ops: Vec<Op>,
    pub max_layers: usize,
    pub allowed_dims: Vec<u32>,
    pub allow_skips: bool,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub population: Option<usize>,
    #[serde(default)]
    pub generations: Option<usize>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub citations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionDraft {
    pub verdict: Verdict,
    #[serde(default)]
    pub hints: Vec<Hint>,
    #[serde(default)]
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reranking {
    pub ranking: Vec<String>,
}

fn parse<T: DeserializeOwned>(payload: &Value) -> Result<T, String> {
    T::deserialize(payload).map_err(|e| e.to_string())
}

fn no_duplicates<T: std::hash::Hash + Eq + fmt::Debug>(field: &str, xs: &[T]) -> Result<(), String> {
    let mut seen = HashSet::new();
    for x in xs {
        if !seen.insert(x) {
            return Err(format!("duplicate {x:?} in `{field}`"));
        }
    }
    Ok(())
}

fn cited_ids_injected(citations: &[String], env: &PromptEnvelope) -> Result<(), String> {
    let injected: HashSet<&str> = env.injected_ids().collect();
    for id in citations {
        if !injected.contains(id.as_str()) {
            return Err(format!("citation `{id}` was not among the injected knowledge"));
        }
    }
    Ok(())
}

/// Checks `payload` against the schema of `env.template_id`; the envelope is
/// needed for rules that refer to the injected knowledge.
pub fn validate_payload(env: &PromptEnvelope, payload: &Value) -> Result<(), String> {
    if !payload.is_object() {
        return Err("payload must be a single JSON object".to_string());
    }
    match env.template_id {
        TemplateId::SummarizeDoc => {
            let s: DocSummary = parse(payload)?;
            if s.summary.trim().is_empty() {
                return Err("`summary` must not be empty".into());
            }
        }
        TemplateId::ExtractFacets => {
            let list: FacetList = parse(payload)?;
            if list.facets.is_empty() || list.facets.len() > MAX_FACETS {
                return Err(format!("expected 1..={MAX_FACETS} facets, got {}", list.facets.len()));
            }
            if list.facets.iter().any(|f| f.text.trim().is_empty()) {
                return Err("facet text must not be empty".into());
            }
        }
        TemplateId::MakeTaskPlan => {
            let plan: TaskPlanDraft = parse(payload)?;
            if plan.dataset.trim().is_empty() {
                return Err("`dataset` must not be empty".into());
            }
            if !Metric::allowed_for(plan.task_type).contains(&plan.metric) {
                return Err(format!("metric {} does not fit task {}", plan.metric, plan.task_type));
            }
            if plan.higher_is_better.is_some_and(|h| h != plan.metric.higher_is_better()) {
                return Err(format!("`higher_is_better` contradicts metric {}", plan.metric));
            }
            if let Some(b) = plan.budget {
                if b.max_candidates == 0 || b.seeds_per_eval == 0 {
                    return Err("budget values must be positive".into());
                }
            }
        }
        TemplateId::MakeFeaturePlan => {
            let plan: FeaturePlanDraft = parse(payload)?;
            no_duplicates("directives", &plan.directives)?;
            no_duplicates("citations", &plan.citations)?;
            cited_ids_injected(&plan.citations, env)?;
        }
        TemplateId::MakeSearchConfig => {
            let cfg: SearchConfigDraft = parse(payload)?;
            if cfg.allowed_ops.is_empty() || cfg.allowed_dims.is_empty() {
                return Err("`allowed_ops` and `allowed_dims` must not be empty".into());
            }
            no_duplicates("allowed_ops", &cfg.allowed_ops)?;
            no_duplicates("allowed_dims", &cfg.allowed_dims)?;
            if let Some(d) = cfg.allowed_dims.iter().find(|d| !DIMS.contains(d)) {
                return Err(format!("hidden dim {d} is not one of {DIMS:?}"));
            }
            if cfg.max_layers == 0 || cfg.max_layers > MAX_LAYERS {
                return Err(format!("`max_layers` must be in 1..={MAX_LAYERS}"));
            }
            if cfg.population.is_some_and(|p| p < 2)
                || cfg.generations == Some(0)
                || cfg.samples == Some(0)
            {
                return Err("population must be >= 2; generations and samples >= 1".into());
            }
            cited_ids_injected(&cfg.citations, env)?;
        }
        TemplateId::ReviewResults => {
            let d: DecisionDraft = parse(payload)?;
            no_duplicates("hints", &d.hints)?;
            if d.verdict == Verdict::Revise && d.hints.is_empty() {
                return Err("a revise verdict needs at least one hint".into());
            }
        }
        TemplateId::CompileReport => {
            parse::<ReportSummary>(payload)?;
        }
        TemplateId::RerankKnowledge => {
            let r: Reranking = parse(payload)?;
            no_duplicates("ranking", &r.ranking)?;
            cited_ids_injected(&r.ranking, env)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn task_plan_metric_consistency() {
        let env = PromptEnvelope::new(TemplateId::MakeTaskPlan);
        let ok = json!({"task_type": "node-classification", "dataset": "Cora", "metric": "accuracy"});
        assert!(validate_payload(&env, &ok).is_ok());
        let wrong = json!({"task_type": "link-ranking", "dataset": "x", "metric": "accuracy"});
        assert!(validate_payload(&env, &wrong).is_err());
        let contradiction = json!({"task_type": "graph-classification", "dataset": "x",
            "metric": "rmse", "higher_is_better": true});
        assert!(validate_payload(&env, &contradiction).is_err());
    }

    #[test]
    fn duplicate_directive_rejected() {
        let env = PromptEnvelope::new(TemplateId::MakeFeaturePlan);
        let payload = json!({"directives": ["self-loops", "self-loops"], "citations": []});
        let err = validate_payload(&env, &payload).unwrap_err();
        assert!(err.contains("duplicate"));
    }

    #[test]
    fn citations_must_be_injected() {
        let env = PromptEnvelope::new(TemplateId::MakeFeaturePlan).inject("d/f01", "text");
        let good = json!({"directives": [], "citations": ["d/f01"]});
        let bad = json!({"directives": [], "citations": ["d/f02"]});
        assert!(validate_payload(&env, &good).is_ok());
        assert!(validate_payload(&env, &bad).is_err());
    }

    #[test]
    fn revise_needs_hints() {
        let env = PromptEnvelope::new(TemplateId::ReviewResults);
        assert!(validate_payload(&env, &json!({"verdict": "revise", "hints": []})).is_err());
        assert!(validate_payload(&env, &json!({"verdict": "revise", "hints": ["widen-ops"]})).is_ok());
        assert!(validate_payload(&env, &json!({"verdict": "accept"})).is_ok());
    }

    #[test]
    fn non_object_rejected() {
        let env = PromptEnvelope::new(TemplateId::CompileReport);
        assert!(validate_payload(&env, &json!(["summary"])).is_err());
    }
}
