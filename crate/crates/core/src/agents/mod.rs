//! The agent pipeline around the gateway, knowledge store, search and
//! evaluation backend.

mod pipeline;
mod steps;
mod types;

pub use pipeline::{run_id, PipelineSettings, RunFileError, RUN_FILE_HEADER};
pub use steps::{apply_hints, Agents, PlanDefaults, RetrievalSettings, WIDEN_PRIORITY};
pub use types::{
    AgentError, Decision, ExperimentReport, FeaturePlan, PipelineFailure, PipelineStage, ProgressEvent,
    ResourceUsage, RunResult, SearchConfig, SearchRound, TaskPlan,
};
