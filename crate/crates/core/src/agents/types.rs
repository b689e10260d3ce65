use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::{decode, ArchGenotype, SearchSpace, SearchTrace, TaskType};
use crate::eval::{Directive, EvalError, GraphProfile};
use crate::gateway::schema::{Algorithm, Budget, Hint, Metric, Verdict};
use crate::gateway::{GatewayError, TranscriptEntry};
use crate::knowledge::KnowledgeError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPlan {
    pub task_type: TaskType,
    /// Registry name the run evaluates on.
    pub dataset: String,
    /// Dataset name as interpreted from the instruction, before mapping.
    pub requested_dataset: String,
    pub metric: Metric,
    pub higher_is_better: bool,
    pub budget: Budget,
}

impl TaskPlan {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.dataset.trim().is_empty() {
            out.push("dataset is empty".to_string());
        }
        if !Metric::allowed_for(self.task_type).contains(&self.metric) {
            out.push(format!("metric {} does not fit task {}", self.metric, self.task_type));
        }
        if self.higher_is_better != self.metric.higher_is_better() {
            out.push(format!("higher_is_better contradicts metric {}", self.metric));
        }
        if self.budget.max_candidates == 0 || self.budget.seeds_per_eval == 0 {
            out.push("budget values must be positive".to_string());
        }
        out
    }

    /// Evaluation seeds `1..=seeds_per_eval`.
    pub fn eval_seeds(&self) -> Vec<u64> {
        (1..=self.budget.seeds_per_eval as u64).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeaturePlan {
    pub directives: Vec<Directive>,
    pub citations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub space: SearchSpace,
    pub algorithm: Algorithm,
    pub population: usize,
    pub generations: usize,
    /// Sample count for random search.
    pub samples: usize,
    pub seed_genotypes: Vec<ArchGenotype>,
    pub citations: Vec<String>,
}

impl SearchConfig {
    pub fn planned_evals(&self) -> usize {
        match self.algorithm {
            Algorithm::Evolutionary => self.population * self.generations,
            Algorithm::Random => self.samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub verdict: Verdict,
    pub hints: Vec<Hint>,
    pub rationale: String,
    /// The revision budget overrode the model's verdict.
    #[serde(default)]
    pub forced: bool,
    /// Experiment-report items shown to the reviewer.
    #[serde(default)]
    pub consulted: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceUsage {
    pub wall_ms: u64,
    pub evals: usize,
    pub token_estimate: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub run_id: String,
    pub plan: TaskPlan,
    pub best_genotype: String,
    pub metric_mean: f64,
    pub metric_std: f64,
    pub revisions_used: usize,
    pub resource: ResourceUsage,
    #[serde(default)]
    pub feature_plan: Vec<Directive>,
    #[serde(default)]
    pub summary: String,
}

impl ExperimentReport {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.run_id.trim().is_empty() {
            out.push("run_id is empty".to_string());
        }
        if self.plan.dataset.trim().is_empty() {
            out.push("dataset is empty".to_string());
        }
        if let Err(e) = decode(&self.best_genotype) {
            out.push(format!("best_genotype: {e}"));
        }
        if !self.metric_mean.is_finite() {
            out.push("metric_mean is not finite".to_string());
        }
        if !(self.metric_std.is_finite() && self.metric_std >= 0.0) {
            out.push("metric_std must be a finite non-negative number".to_string());
        }
        out
    }

    /// The text stored and embedded in the experiment knowledge base. Names
    /// are kept as separate words so a query for the dataset matches them.
    pub fn knowledge_text(&self) -> String {
        let mut words = vec![
            "experiment".to_string(),
            self.run_id.clone(),
            self.plan.task_type.to_string(),
            "dataset".to_string(),
            self.plan.dataset.clone(),
        ];
        if self.plan.requested_dataset != self.plan.dataset && !self.plan.requested_dataset.is_empty() {
            words.push(self.plan.requested_dataset.clone());
        }
        words.extend([
            self.plan.metric.to_string(),
            format!("{:.4}", self.metric_mean),
            "std".to_string(),
            format!("{:.4}", self.metric_std),
            "best".to_string(),
            self.best_genotype.clone(),
            "revisions".to_string(),
            self.revisions_used.to_string(),
        ]);
        if !self.feature_plan.is_empty() {
            words.push("features".to_string());
            words.extend(self.feature_plan.iter().map(|d| d.to_string()));
        }
        words.join(" ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineStage {
    Plan,
    Profile,
    Features,
    Configure,
    Search,
    Review,
    Report,
}

impl PipelineStage {
    pub fn as_str(self) -> &'static str {
        match self {
            PipelineStage::Plan => "plan",
            PipelineStage::Profile => "profile",
            PipelineStage::Features => "features",
            PipelineStage::Configure => "configure",
            PipelineStage::Search => "search",
            PipelineStage::Review => "review",
            PipelineStage::Report => "report",
        }
    }
}

impl fmt::Display for PipelineStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum ProgressEvent {
    StageEntered {
        stage: PipelineStage,
        revision: usize,
    },
    GenerationCompleted {
        revision: usize,
        generation: usize,
        best_score: f64,
        best_genotype: String,
    },
    DecisionMade {
        revision: usize,
        verdict: Verdict,
        hints: Vec<Hint>,
        forced: bool,
    },
    ReportStored {
        run_id: String,
        item_id: Option<String>,
    },
}

/// One search round: the inputs it ran with and what it found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRound {
    pub feature_plan: FeaturePlan,
    pub config: SearchConfig,
    pub trace: SearchTrace,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run_id: String,
    pub instruction: String,
    pub seed: u64,
    pub plan: TaskPlan,
    pub profile: GraphProfile,
    pub rounds: Vec<SearchRound>,
    pub report: ExperimentReport,
    /// Item id of the stored report, when the experiment base was updated.
    pub report_item: Option<String>,
    pub events: Vec<ProgressEvent>,
    pub transcript: Vec<TranscriptEntry>,
}

impl RunResult {
    pub fn traces(&self) -> impl Iterator<Item = &SearchTrace> {
        self.rounds.iter().map(|r| &r.trace)
    }
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("planning failed: {0}")]
    Plan(String),
    #[error("profiling failed: {0}")]
    Profile(#[source] EvalError),
    #[error("feature planning failed: {0}")]
    Features(String),
    #[error("search configuration failed: {0}")]
    Configure(String),
    #[error("review failed: {0}")]
    Review(String),
    #[error("report compilation failed: {0}")]
    Report(String),
}

impl AgentError {
    pub fn stage(&self) -> PipelineStage {
        match self {
            AgentError::Plan(_) => PipelineStage::Plan,
            AgentError::Profile(_) => PipelineStage::Profile,
            AgentError::Features(_) => PipelineStage::Features,
            AgentError::Configure(_) => PipelineStage::Configure,
            AgentError::Review(_) => PipelineStage::Review,
            AgentError::Report(_) => PipelineStage::Report,
        }
    }
}

pub(crate) fn gateway_message(e: &GatewayError) -> String {
    e.to_string()
}

pub(crate) fn knowledge_message(e: &KnowledgeError) -> String {
    e.to_string()
}

/// A pipeline that stopped early, with everything recorded up to that point.
#[derive(Debug, Error)]
#[error("pipeline stopped in stage {stage}: {error}")]
pub struct PipelineFailure {
    pub stage: PipelineStage,
    #[source]
    pub error: AgentError,
    pub events: Vec<ProgressEvent>,
    pub transcript: Vec<TranscriptEntry>,
}
