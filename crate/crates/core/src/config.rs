//! Run configuration: a `archon-config v1` header line followed by TOML.
//!
//! ```text
//! archon-config v1
//! seed = 42
//!
//! [provider]
//! kind = "scripted"
//! fixtures = ["scripts/demo.jsonl"]
//!
//! [backend]
//! kind = "surrogate"
//! noise_scale = 0.0
//!
//! [store]
//! path = "kb.snapshot"
//!
//! [datasets]
//! Cora = "toy-cora"
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::EvolveParams;
use crate::agents::{PipelineSettings, PlanDefaults, RetrievalSettings};
use crate::clock::{Clock, LogicalClock, WallClock};
use crate::eval::{
    Backend, DatasetRegistry, EvalBackend, EvalError, WorkerCommand, WorkerPool, DEFAULT_WORKER_TIMEOUT_MS,
};
use crate::gateway::schema::Budget;
use crate::gateway::{
    CompletionProvider, Embedder, Gateway, HashEmbedder, LiveEmbedder, LiveProvider, ScriptedProvider,
    DEFAULT_EMBED_MODEL,
};
use crate::knowledge::{KnowledgeError, KnowledgeStore};

pub const CONFIG_HEADER: &str = "archon-config v1";
/// The only environment variable the tool reads.
pub const API_KEY_ENV: &str = "ARCHON_API_KEY";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("not a config file: first line must be `{CONFIG_HEADER}`")]
    Header,
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("config field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("fixture file {path}: {message}")]
    Fixture { path: String, message: String },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
}

fn field(name: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: name.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProviderConfig {
    Scripted {
        fixtures: Vec<PathBuf>,
    },
    Live {
        base_url: String,
        model: String,
        #[serde(default)]
        embed_base_url: Option<String>,
        #[serde(default)]
        embed_model: Option<String>,
        #[serde(default = "default_live_timeout")]
        timeout_s: u64,
    },
}

fn default_live_timeout() -> u64 {
    120
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BackendConfig {
    Surrogate {
        #[serde(default)]
        noise_scale: f64,
        #[serde(default)]
        registry: Option<PathBuf>,
    },
    Worker {
        command: String,
        #[serde(default = "one")]
        pool_size: usize,
        #[serde(default = "default_worker_timeout")]
        timeout_ms: u64,
        #[serde(default)]
        registry: Option<PathBuf>,
    },
}

fn one() -> usize {
    1
}

fn default_worker_timeout() -> u64 {
    DEFAULT_WORKER_TIMEOUT_MS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub runs_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchDefaults {
    #[serde(default = "default_population")]
    pub population: usize,
    #[serde(default = "default_generations")]
    pub generations: usize,
    #[serde(default)]
    pub parallel: bool,
    #[serde(default = "default_elite_fraction")]
    pub elite_fraction: f64,
    #[serde(default = "default_tournament")]
    pub tournament: usize,
    #[serde(default = "default_crossover_rate")]
    pub crossover_rate: f64,
    #[serde(default = "default_mutation_rate")]
    pub mutation_rate: f64,
}

fn default_elite_fraction() -> f64 {
    EvolveParams::default().elite_fraction
}

fn default_tournament() -> usize {
    EvolveParams::default().tournament
}

fn default_crossover_rate() -> f64 {
    EvolveParams::default().crossover_rate
}

fn default_mutation_rate() -> f64 {
    EvolveParams::default().mutation_rate
}

fn default_population() -> usize {
    16
}

fn default_generations() -> usize {
    10
}

impl Default for SearchDefaults {
    fn default() -> Self {
        Self {
            population: default_population(),
            generations: default_generations(),
            parallel: false,
            elite_fraction: default_elite_fraction(),
            tournament: default_tournament(),
            crossover_rate: default_crossover_rate(),
            mutation_rate: default_mutation_rate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClockKind {
    /// One millisecond per reading; makes run files reproducible.
    #[default]
    Logical,
    Wall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "yes")]
    pub update_experiment_kb: bool,
    #[serde(default)]
    pub clock: ClockKind,
}

fn yes() -> bool {
    true
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            update_experiment_kb: true,
            clock: ClockKind::Logical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub provider: ProviderConfig,
    pub backend: BackendConfig,
    pub store: StoreConfig,
    #[serde(default = "default_budget")]
    pub budget: Budget,
    #[serde(default)]
    pub search: SearchDefaults,
    #[serde(default)]
    pub retrieval: RetrievalSettings,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    /// User-facing dataset name to registry name.
    #[serde(default)]
    pub datasets: BTreeMap<String, String>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_seed() -> u64 {
    42
}

fn default_budget() -> Budget {
    PlanDefaults::default().budget
}

impl CliConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let (header, body) = text.split_once('\n').unwrap_or((text, ""));
        if header.trim() != CONFIG_HEADER {
            return Err(ConfigError::Header);
        }
        let mut config: CliConfig = toml::from_str(body).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        config.base_dir = base_dir.to_path_buf();
        config.check()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn check(&self) -> Result<(), ConfigError> {
        if self.budget.max_candidates == 0 {
            return Err(field("budget.max_candidates", "must be at least 1"));
        }
        if self.budget.seeds_per_eval == 0 {
            return Err(field("budget.seeds_per_eval", "must be at least 1"));
        }
        if self.search.population < 2 {
            return Err(field("search.population", "must be at least 2"));
        }
        if self.search.generations == 0 {
            return Err(field("search.generations", "must be at least 1"));
        }
        if !(self.search.elite_fraction > 0.0 && self.search.elite_fraction <= 1.0) {
            return Err(field("search.elite_fraction", "must be in (0, 1]"));
        }
        if self.search.tournament == 0 {
            return Err(field("search.tournament", "must be at least 1"));
        }
        for (name, rate) in [
            ("search.crossover_rate", self.search.crossover_rate),
            ("search.mutation_rate", self.search.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(field(name, "must be in [0, 1]"));
            }
        }
        if self.retrieval.per_type_k == 0 {
            return Err(field("retrieval.per_type_k", "must be at least 1"));
        }
        if self.retrieval.final_k == 0 {
            return Err(field("retrieval.final_k", "must be at least 1"));
        }
        match &self.provider {
            ProviderConfig::Scripted { fixtures } if fixtures.is_empty() => {
                return Err(field("provider.fixtures", "list at least one fixture file"));
            }
            ProviderConfig::Live { base_url, .. } if base_url.trim().is_empty() => {
                return Err(field("provider.base_url", "must not be empty"));
            }
            _ => {}
        }
        match &self.backend {
            BackendConfig::Surrogate { noise_scale, .. } if !(noise_scale.is_finite() && *noise_scale >= 0.0) => {
                return Err(field("backend.noise_scale", "must be a finite number >= 0"));
            }
            BackendConfig::Worker { command, .. } if command.trim().is_empty() => {
                return Err(field("backend.command", "must name a program"));
            }
            BackendConfig::Worker { pool_size: 0, .. } => {
                return Err(field("backend.pool_size", "must be at least 1"));
            }
            BackendConfig::Worker { timeout_ms: 0, .. } => {
                return Err(field("backend.timeout_ms", "must be at least 1"));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn store_path(&self) -> PathBuf {
        self.resolve(&self.store.path)
    }

    pub fn runs_dir(&self) -> PathBuf {
        match &self.store.runs_dir {
            Some(dir) => self.resolve(dir),
            None => self.base_dir.join("runs"),
        }
    }

    fn clock(&self) -> Arc<dyn Clock> {
        match self.pipeline.clock {
            ClockKind::Logical => Arc::new(LogicalClock::new()),
            ClockKind::Wall => Arc::new(WallClock::new()),
        }
    }

    pub fn build_gateway(&self) -> Result<Gateway, ConfigError> {
        let (completion, embedder): (Arc<dyn CompletionProvider>, Arc<dyn Embedder>) = match &self.provider {
            ProviderConfig::Scripted { fixtures } => {
                let mut provider = ScriptedProvider::default();
                for fixture in fixtures {
                    let path = self.resolve(fixture);
                    let loaded = ScriptedProvider::from_file(&path).map_err(|e| ConfigError::Fixture {
                        path: path.display().to_string(),
                        message: e.to_string(),
                    })?;
                    provider.extend(loaded);
                }
                (Arc::new(provider), Arc::new(HashEmbedder))
            }
            ProviderConfig::Live {
                base_url,
                model,
                embed_base_url,
                embed_model,
                timeout_s,
            } => {
                let key = std::env::var(API_KEY_ENV).ok();
                let timeout = Duration::from_secs(*timeout_s);
                let completion = LiveProvider::new(base_url, model, key.clone(), timeout);
                let embedder = LiveEmbedder::new(
                    embed_base_url.as_deref().unwrap_or(base_url),
                    embed_model.as_deref().unwrap_or(DEFAULT_EMBED_MODEL),
                    key,
                    timeout,
                );
                (Arc::new(completion), Arc::new(embedder))
            }
        };
        Ok(Gateway::new(completion, embedder, self.clock()))
    }

    fn registry(&self, extra: &Option<PathBuf>) -> Result<DatasetRegistry, ConfigError> {
        let mut registry = DatasetRegistry::builtin();
        if let Some(path) = extra {
            registry.merge(DatasetRegistry::load(&self.resolve(path))?);
        }
        Ok(registry)
    }

    /// Builds the evaluation backend; a worker backend completes its
    /// handshake here.
    pub fn build_backend(&self) -> Result<EvalBackend, ConfigError> {
        let backend = match &self.backend {
            BackendConfig::Surrogate { noise_scale, registry } => {
                EvalBackend::new(self.registry(registry)?, Backend::Surrogate { noise_scale: *noise_scale })
            }
            BackendConfig::Worker {
                command,
                pool_size,
                timeout_ms,
                registry,
            } => {
                let cmd = WorkerCommand::parse(command).ok_or_else(|| field("backend.command", "is empty"))?;
                let pool = WorkerPool::connect(cmd, *pool_size, Duration::from_millis(*timeout_ms))?;
                EvalBackend::new(self.registry(registry)?, Backend::Worker(pool))
            }
        };
        Ok(backend.with_clock(self.clock()))
    }

    /// Loads the store snapshot, or an empty store when none exists yet.
    pub fn load_store(&self) -> Result<KnowledgeStore, ConfigError> {
        let path = self.store_path();
        if path.exists() {
            Ok(KnowledgeStore::snapshot_load(&path)?)
        } else {
            Ok(KnowledgeStore::new())
        }
    }

    pub fn plan_defaults(&self) -> PlanDefaults {
        PlanDefaults {
            budget: self.budget,
            population: self.search.population,
            generations: self.search.generations,
            dataset_map: self.datasets.clone(),
        }
    }

    pub fn pipeline_settings(&self, seed_override: Option<u64>) -> PipelineSettings {
        PipelineSettings {
            seed: seed_override.unwrap_or(self.seed),
            update_experiment_kb: self.pipeline.update_experiment_kb,
            evolution: EvolveParams {
                population: self.search.population,
                generations: self.search.generations,
                elite_fraction: self.search.elite_fraction,
                tournament: self.search.tournament,
                crossover_rate: self.search.crossover_rate,
                mutation_rate: self.search.mutation_rate,
                parallel: self.search.parallel,
            },
        }
    }
}
