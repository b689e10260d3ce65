//! Python bindings: genotype codec, surrogate scoring, the knowledge store
//! and full pipeline runs.

use std::path::PathBuf;

use archon_core::agents::{Agents, RunResult};
use archon_core::arch::{self, evolve, sample, EvolveParams, SearchSpace, TaskType};
use archon_core::config::CliConfig;
use archon_core::eval::{Directive, EvalBackend};
use archon_core::gateway::{self, HashEmbedder, ScriptedProvider};
use archon_core::knowledge::{self, load_documents, read_manifest, RetrievalQuery, Stage};
use archon_core::rng::SplitMix64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

create_exception!(archon, ArchonError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    ArchonError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr<Err = String>>(text: &str) -> PyResult<T> {
    text.parse().map_err(err)
}

fn directives(plan: Vec<String>) -> PyResult<Vec<Directive>> {
    plan.iter().map(|d| parse(d)).collect()
}

/// Canonical form of a genotype string; raises on malformed input.
#[pyfunction]
fn canonical_genotype(genotype: &str) -> PyResult<String> {
    arch::decode(genotype).map(|g| arch::encode(&g)).map_err(err)
}

/// Samples one genotype uniformly from the full space of a task type.
#[pyfunction]
fn sample_genotype(task_type: &str, seed: u64) -> PyResult<String> {
    let task: TaskType = parse(task_type)?;
    Ok(arch::encode(&sample(&SearchSpace::full(task), &mut SplitMix64::new(seed))))
}

/// The deterministic bag-of-tokens embedding used by scripted runs.
#[pyfunction]
fn hash_embed(text: &str) -> Vec<f64> {
    HashEmbedder::embed_one(text)
}

/// Surrogate metric of a genotype on a built-in dataset.
#[pyfunction]
#[pyo3(signature = (genotype, dataset, feature_plan=Vec::new(), noise_scale=0.0, seeds=vec![1]))]
fn surrogate_score(
    genotype: &str,
    dataset: &str,
    feature_plan: Vec<String>,
    noise_scale: f64,
    seeds: Vec<u64>,
) -> PyResult<(f64, f64)> {
    let g = arch::decode(genotype).map_err(err)?;
    let req = archon_core::EvalRequest::new(&g, &directives(feature_plan)?, dataset, &seeds);
    let result = EvalBackend::surrogate(noise_scale).evaluate(&req).map_err(err)?;
    Ok((result.metric_mean, result.metric_std))
}

/// Evolutionary search on the surrogate. Returns the best (score, genotype)
/// after every generation.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (dataset, population=16, generations=10, seed=42, noise_scale=0.0, feature_plan=Vec::new(), seed_genotypes=Vec::new()))]
fn evolve_surrogate(
    py: Python<'_>,
    dataset: &str,
    population: usize,
    generations: usize,
    seed: u64,
    noise_scale: f64,
    feature_plan: Vec<String>,
    seed_genotypes: Vec<String>,
) -> PyResult<Vec<(f64, String)>> {
    if population < 2 || generations == 0 {
        return Err(err("population must be >= 2 and generations >= 1"));
    }
    let backend = EvalBackend::surrogate(noise_scale);
    let profile = backend.graph_profile(dataset).map_err(err)?;
    let plan = directives(feature_plan)?;
    let seeds = seed_genotypes
        .iter()
        .map(|s| arch::decode(s).map_err(err))
        .collect::<PyResult<Vec<_>>>()?;
    let space = SearchSpace::full(profile.task_type());
    let params = EvolveParams::new(population, generations);
    let trace = py.detach(|| {
        let evaluator = backend.evaluator(dataset, &plan, &[1]);
        evolve(&space, &evaluator, &params, &seeds, &mut SplitMix64::new(seed), &mut |_, _| {})
    });
    Ok(trace
        .best_per_generation
        .iter()
        .map(|s| (s.score, arch::encode(&s.genotype)))
        .collect())
}

/// Completion provider plus embedder. Scripted gateways replay JSONL
/// fixtures and embed with hash-v1.
#[pyclass(module = "archon")]
struct Gateway {
    inner: gateway::Gateway,
}

#[pymethods]
impl Gateway {
    #[staticmethod]
    fn scripted(fixtures: Vec<PathBuf>) -> PyResult<Self> {
        let mut provider = ScriptedProvider::default();
        for path in &fixtures {
            provider.extend(ScriptedProvider::from_file(path).map_err(err)?);
        }
        Ok(Self {
            inner: gateway::Gateway::scripted(provider),
        })
    }

    #[staticmethod]
    fn from_config(path: PathBuf) -> PyResult<Self> {
        let config = CliConfig::load(&path).map_err(err)?;
        Ok(Self {
            inner: config.build_gateway().map_err(err)?,
        })
    }

    /// Number of calls logged so far.
    fn transcript_len(&self) -> usize {
        self.inner.transcript().len()
    }

    fn embedder_name(&self) -> String {
        self.inner.embedder_name().to_string()
    }
}

/// Prior and experiment knowledge bases.
#[pyclass(module = "archon")]
struct KnowledgeStore {
    inner: knowledge::KnowledgeStore,
}

#[pymethods]
impl KnowledgeStore {
    #[new]
    fn new() -> Self {
        Self {
            inner: knowledge::KnowledgeStore::new(),
        }
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: knowledge::KnowledgeStore::snapshot_load(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.snapshot_save(&path).map_err(err)
    }

    fn snapshot(&self) -> String {
        self.inner.snapshot_string()
    }

    /// Ingests every document of a manifest; returns the new item ids.
    fn ingest_manifest(&self, manifest: PathBuf, gateway: &Gateway) -> PyResult<Vec<String>> {
        let entries = read_manifest(&manifest).map_err(err)?;
        let base = manifest.parent().map(PathBuf::from).unwrap_or_default();
        let docs = load_documents(&entries, &base).map_err(err)?;
        let mut ids = Vec::new();
        for doc in docs {
            ids.extend(self.inner.ingest_document(doc, &gateway.inner).map_err(err)?);
        }
        Ok(ids)
    }

    /// Ranked `(item_id, final_score, text)` triples.
    #[pyo3(signature = (query, gateway, stage="planning-review", per_type_k=5, final_k=8))]
    fn retrieve(
        &self,
        query: &str,
        gateway: &Gateway,
        stage: &str,
        per_type_k: usize,
        final_k: usize,
    ) -> PyResult<Vec<(String, f64, String)>> {
        let stage: Stage = parse(stage)?;
        let q = RetrievalQuery::new(query, stage).with_k(per_type_k, final_k);
        let ranked = self.inner.retrieve(&q, &gateway.inner).map_err(err)?;
        Ok(ranked
            .entries
            .into_iter()
            .map(|e| (e.item_id, e.final_score, e.text))
            .collect())
    }

    fn experiment_count(&self) -> usize {
        self.inner.experiment_count()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("KnowledgeStore({})", self.inner.stats())
    }
}

/// A finished pipeline run.
#[pyclass(module = "archon")]
struct Run {
    inner: RunResult,
}

#[pymethods]
impl Run {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: RunResult::load(&path).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: RunResult::from_run_file(text).map_err(err)?,
        })
    }

    #[getter]
    fn run_id(&self) -> String {
        self.inner.run_id.clone()
    }

    #[getter]
    fn dataset(&self) -> String {
        self.inner.report.plan.dataset.clone()
    }

    #[getter]
    fn best_genotype(&self) -> String {
        self.inner.report.best_genotype.clone()
    }

    #[getter]
    fn metric_mean(&self) -> f64 {
        self.inner.report.metric_mean
    }

    #[getter]
    fn metric_std(&self) -> f64 {
        self.inner.report.metric_std
    }

    #[getter]
    fn revisions_used(&self) -> usize {
        self.inner.report.revisions_used
    }

    #[getter]
    fn verdicts(&self) -> Vec<String> {
        self.inner
            .rounds
            .iter()
            .map(|r| r.decision.verdict.to_string())
            .collect()
    }

    #[getter]
    fn report_item(&self) -> Option<String> {
        self.inner.report_item.clone()
    }

    /// The compiled report as a JSON string.
    fn report_json(&self) -> String {
        serde_json::to_string(&self.inner.report).expect("report serializes")
    }

    fn to_run_file(&self) -> String {
        self.inner.to_run_file()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Run({}, {} {:.4}, {})",
            self.inner.run_id, self.inner.report.plan.metric, self.inner.report.metric_mean, self.inner.report.best_genotype
        )
    }
}

/// Runs the pipeline described by a config file against `store`.
#[pyfunction]
#[pyo3(signature = (config_path, instruction, store, seed=None))]
fn run_pipeline(
    py: Python<'_>,
    config_path: PathBuf,
    instruction: &str,
    store: &KnowledgeStore,
    seed: Option<u64>,
) -> PyResult<Run> {
    let config = CliConfig::load(&config_path).map_err(err)?;
    let gateway = config.build_gateway().map_err(err)?;
    let backend = config.build_backend().map_err(err)?;
    let settings = config.pipeline_settings(seed);
    let result = py.detach(|| {
        Agents::new(&gateway, &store.inner, &backend)
            .with_defaults(config.plan_defaults())
            .with_retrieval(config.retrieval)
            .run_pipeline(instruction, &settings, &mut |_| {})
    });
    result
        .map(|inner| Run { inner })
        .map_err(|f| err(format!("run failed in the {} stage: {}", f.stage, f.error)))
}

#[pymodule]
fn archon(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ArchonError", m.py().get_type::<ArchonError>())?;
    m.add_class::<Gateway>()?;
    m.add_class::<KnowledgeStore>()?;
    m.add_class::<Run>()?;
    m.add_function(wrap_pyfunction!(canonical_genotype, m)?)?;
    m.add_function(wrap_pyfunction!(sample_genotype, m)?)?;
    m.add_function(wrap_pyfunction!(hash_embed, m)?)?;
    m.add_function(wrap_pyfunction!(surrogate_score, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_surrogate, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
