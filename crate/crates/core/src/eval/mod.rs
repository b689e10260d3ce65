//! Genotype scoring: a deterministic surrogate, the dataset registry and a
//! pool of external training workers.

mod protocol;
mod registry;
mod surrogate;
mod worker;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::{decode, encode, validate, ArchGenotype, CodecError, Evaluator, SearchSpace, TaskType};
use crate::clock::{Clock, WallClock};
use crate::hash::fnv1a64;

pub use protocol::{
    Hello, ProgressRecord, ProtocolError, Record, ResultRecord, ErrorRecord, PROTOCOL_VERSION,
};
pub use registry::{DatasetFiles, DatasetRegistry, FeatureEffects, GraphData, Node};
pub use surrogate::{noise_term, noise_free_fitness, surrogate_fitness, surrogate_fitness_seeded};
pub use worker::{WorkerCommand, WorkerConnection, WorkerPool, WorkerReply, DEFAULT_WORKER_TIMEOUT_MS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Directive {
    NormalizeFeatures,
    AddDegreeFeature,
    SelfLoops,
    RowNormalizeAdjacency,
    PcaReduce,
}

impl Directive {
    pub const ALL: &'static [Directive] = &[
        Directive::NormalizeFeatures,
        Directive::AddDegreeFeature,
        Directive::SelfLoops,
        Directive::RowNormalizeAdjacency,
        Directive::PcaReduce,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Directive::NormalizeFeatures => "normalize-features",
            Directive::AddDegreeFeature => "add-degree-feature",
            Directive::SelfLoops => "self-loops",
            Directive::RowNormalizeAdjacency => "row-normalize-adjacency",
            Directive::PcaReduce => "pca-reduce",
        }
    }
}

impl fmt::Display for Directive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Directive {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Directive::ALL
            .iter()
            .copied()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| format!("unknown directive {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    HomophilousNode,
    HeterophilousNode,
    GraphMolecule,
    Ranking,
}

impl ProfileKind {
    pub const ALL: &'static [ProfileKind] = &[
        ProfileKind::HomophilousNode,
        ProfileKind::HeterophilousNode,
        ProfileKind::GraphMolecule,
        ProfileKind::Ranking,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProfileKind::HomophilousNode => "homophilous-node",
            ProfileKind::HeterophilousNode => "heterophilous-node",
            ProfileKind::GraphMolecule => "graph-molecule",
            ProfileKind::Ranking => "ranking",
        }
    }

    pub fn task_type(self) -> TaskType {
        match self {
            ProfileKind::HomophilousNode | ProfileKind::HeterophilousNode => {
                TaskType::NodeClassification
            }
            ProfileKind::GraphMolecule => TaskType::GraphClassification,
            ProfileKind::Ranking => TaskType::LinkRanking,
        }
    }
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphProfile {
    pub dataset: String,
    pub kind: ProfileKind,
    pub num_nodes: usize,
    pub num_edges: usize,
    pub feature_dim: usize,
    pub num_classes: usize,
    pub homophily_estimate: f64,
}

impl GraphProfile {
    pub fn task_type(&self) -> TaskType {
        self.kind.task_type()
    }
}

/// One unit of work for a backend. Field order is the wire order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRequest {
    pub request_id: String,
    pub genotype: String,
    pub feature_plan: Vec<Directive>,
    pub dataset: String,
    pub seeds: Vec<u64>,
    pub epochs_cap: u32,
}

impl EvalRequest {
    /// Builds a request whose id is a digest of everything that affects
    /// the outcome, so identical work always carries the same id.
    pub fn new(genotype: &ArchGenotype, feature_plan: &[Directive], dataset: &str, seeds: &[u64]) -> Self {
        let encoded = encode(genotype);
        let plan: Vec<&str> = feature_plan.iter().map(|d| d.as_str()).collect();
        let seed_list: Vec<String> = seeds.iter().map(u64::to_string).collect();
        let key = format!("{encoded}|{dataset}|{}|{}", plan.join(","), seed_list.join(","));
        Self {
            request_id: format!("req-{:016x}", fnv1a64(key.as_bytes())),
            genotype: encoded,
            feature_plan: feature_plan.to_vec(),
            dataset: dataset.to_string(),
            seeds: seeds.to_vec(),
            epochs_cap: genotype.epochs.value(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub request_id: String,
    pub metric_mean: f64,
    pub metric_std: f64,
    pub higher_is_better: bool,
    pub wall_ms: u64,
    pub evals: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("worker timed out after {millis} ms")]
    Timeout { millis: u64 },
    #[error("worker protocol violation: {message} (raw: {raw:?})")]
    Protocol { message: String, raw: String },
    #[error("worker reported error for {request_id}: {message}")]
    Worker { request_id: String, message: String },
    #[error("worker handshake refused: {0}")]
    Handshake(String),
    #[error("worker could not be started: {0}")]
    Spawn(String),
    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),
    #[error("invalid genotype for task: {}", .0.join("; "))]
    InvalidGenotype(Vec<String>),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("dataset error: {0}")]
    Dataset(String),
}

/// Where evaluations are carried out.
pub enum Backend {
    Surrogate { noise_scale: f64 },
    Worker(WorkerPool),
}

impl fmt::Debug for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Surrogate { noise_scale } => {
                f.debug_struct("Surrogate").field("noise_scale", noise_scale).finish()
            }
            Backend::Worker(pool) => f.debug_tuple("Worker").field(pool.command()).finish(),
        }
    }
}

pub struct EvalBackend {
    registry: DatasetRegistry,
    backend: Backend,
    clock: Arc<dyn Clock>,
}

impl fmt::Debug for EvalBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EvalBackend")
            .field("datasets", &self.registry.datasets())
            .field("backend", &self.backend)
            .finish()
    }
}

impl EvalBackend {
    pub fn new(registry: DatasetRegistry, backend: Backend) -> Self {
        Self {
            registry,
            backend,
            clock: Arc::new(WallClock::new()),
        }
    }

    /// Surrogate scoring over the built-in toy datasets.
    pub fn surrogate(noise_scale: f64) -> Self {
        Self::new(DatasetRegistry::builtin(), Backend::Surrogate { noise_scale })
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn registry(&self) -> &DatasetRegistry {
        &self.registry
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn graph_profile(&self, dataset: &str) -> Result<GraphProfile, EvalError> {
        self.registry.graph_profile(dataset)
    }

    fn check(&self, req: &EvalRequest) -> Result<(ArchGenotype, GraphProfile), EvalError> {
        let genotype = decode(&req.genotype)?;
        let profile = self.registry.graph_profile(&req.dataset)?;
        let task = profile.task_type();
        let problems = validate(&genotype, task, &SearchSpace::full(task));
        if !problems.is_empty() {
            return Err(EvalError::InvalidGenotype(problems));
        }
        if req.seeds.is_empty() {
            return Err(EvalError::InvalidRequest("seed list is empty".into()));
        }
        let mut plan = req.feature_plan.clone();
        plan.sort();
        plan.dedup();
        if plan.len() != req.feature_plan.len() {
            return Err(EvalError::InvalidRequest("duplicate directive in feature plan".into()));
        }
        Ok((genotype, profile))
    }

    pub fn evaluate(&self, req: &EvalRequest) -> Result<EvalResult, EvalError> {
        let (genotype, profile) = self.check(req)?;
        match &self.backend {
            Backend::Surrogate { noise_scale } => {
                let start = self.clock.now_ms();
                let effects = self.registry.feature_effects(profile.kind);
                let scores: Vec<f64> = req
                    .seeds
                    .iter()
                    .map(|&seed| {
                        surrogate_fitness_seeded(
                            &genotype,
                            profile.kind,
                            &req.feature_plan,
                            &effects,
                            *noise_scale,
                            seed,
                        )
                    })
                    .collect();
                let (mean, std) = mean_std(&scores);
                Ok(EvalResult {
                    request_id: req.request_id.clone(),
                    metric_mean: mean,
                    metric_std: std,
                    higher_is_better: true,
                    wall_ms: self.clock.now_ms().saturating_sub(start),
                    evals: scores.len(),
                })
            }
            Backend::Worker(pool) => {
                let reply = pool.evaluate(req)?;
                Ok(EvalResult {
                    request_id: reply.result.request_id,
                    metric_mean: reply.result.metric_mean,
                    metric_std: reply.result.metric_std,
                    higher_is_better: true,
                    wall_ms: reply.result.wall_ms,
                    evals: req.seeds.len(),
                })
            }
        }
    }

    /// Adapts this backend to the search loop for one dataset and feature plan.
    pub fn evaluator<'a>(&'a self, dataset: &str, feature_plan: &[Directive], seeds: &[u64]) -> SearchEvaluator<'a> {
        SearchEvaluator {
            backend: self,
            dataset: dataset.to_string(),
            feature_plan: feature_plan.to_vec(),
            seeds: seeds.to_vec(),
        }
    }
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    if values.iter().all(|v| v.to_bits() == values[0].to_bits()) {
        return (values[0], 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub struct SearchEvaluator<'a> {
    backend: &'a EvalBackend,
    dataset: String,
    feature_plan: Vec<Directive>,
    seeds: Vec<u64>,
}

impl SearchEvaluator<'_> {
    pub fn request(&self, genotype: &ArchGenotype) -> EvalRequest {
        EvalRequest::new(genotype, &self.feature_plan, &self.dataset, &self.seeds)
    }
}

impl Evaluator for SearchEvaluator<'_> {
    fn evaluate(&self, genotype: &ArchGenotype) -> Result<f64, EvalError> {
        self.backend.evaluate(&self.request(genotype)).map(|r| r.metric_mean)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eighty() -> ArchGenotype {
        decode("v1;ops=gcn,gcn;dim=64;act=relu;drop=0.50;skips=0-2;pool=none;lr=0.005;wd=0.0005;ep=200")
            .unwrap()
    }

    #[test]
    fn surrogate_single_seed() {
        let backend = EvalBackend::surrogate(0.0);
        let req = EvalRequest::new(&eighty(), &[], "toy-cora", &[1]);
        let result = backend.evaluate(&req).unwrap();
        assert_eq!(result.metric_mean, 0.80);
        assert_eq!(result.metric_std, 0.0);
        assert_eq!(result.evals, 1);
        assert_eq!(result.request_id, req.request_id);
    }

    #[test]
    fn noise_free_std_is_zero_for_any_seed_list() {
        let backend = EvalBackend::surrogate(0.0);
        for seeds in [vec![0], vec![1, 2, 3], (0..17).collect::<Vec<_>>()] {
            let result = backend.evaluate(&EvalRequest::new(&eighty(), &[], "toy-cora", &seeds)).unwrap();
            assert_eq!(result.metric_std, 0.0);
            assert_eq!(result.metric_mean, 0.80);
        }
    }

    #[test]
    fn noisy_seeds_spread() {
        let backend = EvalBackend::surrogate(0.1);
        let result = backend
            .evaluate(&EvalRequest::new(&eighty(), &[], "toy-cora", &[1, 2, 3, 4]))
            .unwrap();
        assert!(result.metric_std > 0.0);
        assert!((result.metric_mean - 0.80).abs() <= 0.05);
    }

    #[test]
    fn request_validation() {
        let backend = EvalBackend::surrogate(0.0);
        let mut req = EvalRequest::new(&eighty(), &[], "toy-unknown", &[1]);
        assert!(matches!(backend.evaluate(&req), Err(EvalError::UnknownDataset(_))));
        req.dataset = "toy-mol".into();
        assert!(matches!(backend.evaluate(&req), Err(EvalError::InvalidGenotype(_))));
        req.dataset = "toy-cora".into();
        req.genotype = "v2;nonsense".into();
        assert!(matches!(backend.evaluate(&req), Err(EvalError::Codec(_))));
        let mut req = EvalRequest::new(&eighty(), &[], "toy-cora", &[]);
        assert!(matches!(backend.evaluate(&req), Err(EvalError::InvalidRequest(_))));
        req.seeds = vec![1];
        req.feature_plan = vec![Directive::SelfLoops, Directive::SelfLoops];
        assert!(matches!(backend.evaluate(&req), Err(EvalError::InvalidRequest(_))));
    }

    #[test]
    fn request_ids_are_stable_and_distinct() {
        let a = EvalRequest::new(&eighty(), &[], "toy-cora", &[1]);
        let b = EvalRequest::new(&eighty(), &[], "toy-cora", &[1]);
        let c = EvalRequest::new(&eighty(), &[Directive::NormalizeFeatures], "toy-cora", &[1]);
        assert_eq!(a.request_id, b.request_id);
        assert_ne!(a.request_id, c.request_id);
        assert_eq!(a.epochs_cap, 200);
    }

    #[test]
    fn population_std() {
        let (m, s) = mean_std(&[0.0, 1.0]);
        assert_eq!(m, 0.5);
        assert_eq!(s, 0.5);
    }

    #[test]
    fn directive_names_round_trip() {
        for d in Directive::ALL {
            assert_eq!(d.as_str().parse::<Directive>().unwrap(), *d);
            assert_eq!(serde_json::to_string(d).unwrap(), format!("\"{d}\""));
        }
    }
}
