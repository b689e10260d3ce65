//! `archon`: ingest corpora, query the knowledge bases, run the agent
//! pipeline and inspect saved runs.

mod render;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use archon_core::agents::{Agents, RetrievalSettings, RunResult};
use archon_core::config::CliConfig;
use archon_core::gateway::{Gateway, HashEmbedder, ScriptedProvider};
use archon_core::gateway::Embedder;
use archon_core::knowledge::{load_documents, read_manifest, KnowledgeStore, RetrievalQuery, Stage};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "archon", version, about = "Knowledge-guided GNN architecture search")]
struct Cli {
    /// Configuration file (`archon-config v1`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Knowledge store snapshot; overrides the configured path.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Emit one JSON record per line instead of human-readable text.
    #[arg(long, global = true)]
    machine: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract knowledge from every document in a manifest into the store.
    Ingest { manifest: PathBuf },
    /// Retrieve the knowledge most relevant to a query.
    Query {
        text: String,
        #[arg(long, default_value = "planning-review", value_parser = parse_stage)]
        stage: Stage,
        /// Number of items to return.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Run the full pipeline for an instruction and save the run file.
    Run {
        instruction: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summarize a saved run file.
    ShowRun { run_file: PathBuf },
}

fn parse_stage(text: &str) -> Result<Stage, String> {
    text.parse()
}

#[derive(Debug, Error)]
enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl Failure {
    fn runtime(e: impl std::fmt::Display) -> Self {
        Failure::Runtime(e.to_string())
    }

    fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Usage(_) => ExitCode::from(1),
            Failure::Runtime(_) => ExitCode::from(2),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("archon: {failure}");
            failure.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    match &cli.command {
        Command::Ingest { manifest } => ingest(cli, manifest, &mut out),
        Command::Query { text, stage, k } => query(cli, text, *stage, *k, &mut out),
        Command::Run { instruction, seed } => run(cli, instruction, *seed, &mut out),
        Command::ShowRun { run_file } => show_run(cli, run_file, &mut out),
    }
}

fn load_config(cli: &Cli) -> Result<Option<CliConfig>, Failure> {
    cli.config
        .as_deref()
        .map(|path| CliConfig::load(path).map_err(Failure::runtime))
        .transpose()
}

fn require_config(cli: &Cli, command: &str) -> Result<CliConfig, Failure> {
    load_config(cli)?.ok_or_else(|| Failure::Usage(format!("{command} needs --config")))
}

fn store_path(cli: &Cli, config: Option<&CliConfig>) -> Result<PathBuf, Failure> {
    match (&cli.store, config) {
        (Some(path), _) => Ok(path.clone()),
        (None, Some(config)) => Ok(config.store_path()),
        (None, None) => Err(Failure::Usage("pass --store or --config".into())),
    }
}

fn open_store(path: &Path) -> Result<KnowledgeStore, Failure> {
    if path.exists() {
        KnowledgeStore::snapshot_load(path).map_err(Failure::runtime)
    } else {
        Ok(KnowledgeStore::new())
    }
}

fn write_line(out: &mut impl Write, line: impl std::fmt::Display) -> Result<(), Failure> {
    writeln!(out, "{line}").map_err(Failure::runtime)
}

fn ingest(cli: &Cli, manifest: &Path, out: &mut impl Write) -> Result<(), Failure> {
    let config = require_config(cli, "ingest")?;
    let path = store_path(cli, Some(&config))?;
    let entries = read_manifest(manifest).map_err(Failure::runtime)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let documents = load_documents(&entries, base).map_err(Failure::runtime)?;
    let store = open_store(&path)?;
    let gateway = config.build_gateway().map_err(Failure::runtime)?;

    let mut rows = Vec::new();
    for doc in documents {
        let (doc_id, resource) = (doc.doc_id.clone(), doc.resource_type);
        let ids = store.ingest_document(doc, &gateway).map_err(Failure::runtime)?;
        rows.push((doc_id, resource, ids));
    }
    store.snapshot_save(&path).map_err(Failure::runtime)?;

    if cli.machine {
        for (doc_id, resource, ids) in &rows {
            write_line(out, json!({"doc_id": doc_id, "resource_type": resource, "items": ids.len(), "item_ids": ids}))?;
        }
    } else {
        for (doc_id, resource, ids) in &rows {
            write_line(out, format!("{doc_id:<24} {:<18} {} items", resource.as_str(), ids.len()))?;
        }
        let total: usize = rows.iter().map(|r| r.2.len()).sum();
        write_line(out, format!("{} documents, {total} items -> {}", rows.len(), path.display()))?;
    }
    Ok(())
}

/// Query embeddings must come from the embedder that built the store.
fn query_gateway(config: Option<&CliConfig>, store: &KnowledgeStore) -> Result<Gateway, Failure> {
    let gateway = match config {
        Some(config) => config.build_gateway().map_err(Failure::runtime)?,
        None => Gateway::scripted(ScriptedProvider::default()),
    };
    if let Some(name) = store.embedder_name() {
        if name != gateway.embedder_name() {
            let hint = if config.is_none() && name != HashEmbedder.name() { "; pass --config" } else { "" };
            return Err(Failure::Runtime(format!(
                "store was embedded with {name}, query embedder is {}{hint}",
                gateway.embedder_name()
            )));
        }
    }
    Ok(gateway)
}

fn query(cli: &Cli, text: &str, stage: Stage, k: Option<usize>, out: &mut impl Write) -> Result<(), Failure> {
    let config = load_config(cli)?;
    let path = store_path(cli, config.as_ref())?;
    let store = open_store(&path)?;
    if store.is_empty() {
        return Ok(());
    }
    let gateway = query_gateway(config.as_ref(), &store)?;
    let settings = config.as_ref().map(|c| c.retrieval).unwrap_or_else(RetrievalSettings::default);
    let final_k = k.unwrap_or(settings.final_k);
    if final_k == 0 {
        return Err(Failure::Usage("--k must be at least 1".into()));
    }
    let query = RetrievalQuery::new(text, stage).with_k(settings.per_type_k.max(final_k), final_k);
    let ranked = store.retrieve(&query, &gateway).map_err(Failure::runtime)?;
    for (rank, entry) in ranked.entries.iter().enumerate() {
        if cli.machine {
            write_line(out, serde_json::to_string(entry).expect("entry serializes"))?;
        } else {
            write_line(out, render::ranked_line(rank + 1, entry))?;
        }
    }
    Ok(())
}

fn run(cli: &Cli, instruction: &str, seed: Option<u64>, out: &mut impl Write) -> Result<(), Failure> {
    let config = require_config(cli, "run")?;
    let path = store_path(cli, Some(&config))?;
    let store = open_store(&path)?;
    let gateway = config.build_gateway().map_err(Failure::runtime)?;
    let backend = config.build_backend().map_err(Failure::runtime)?;
    let agents = Agents::new(&gateway, &store, &backend)
        .with_defaults(config.plan_defaults())
        .with_retrieval(config.retrieval);
    let settings = config.pipeline_settings(seed);

    let machine = cli.machine;
    let mut sink_error = None;
    let result = agents.run_pipeline(instruction, &settings, &mut |event| {
        let written = if machine {
            writeln!(out, "{}", serde_json::to_string(event).expect("event serializes"))
        } else {
            writeln!(std::io::stderr(), "{}", render::event_line(event))
        };
        if let Err(e) = written {
            sink_error.get_or_insert(e);
        }
    });
    if let Some(e) = sink_error {
        return Err(Failure::runtime(e));
    }
    let result = result.map_err(|f| Failure::Runtime(format!("run failed in the {} stage: {}", f.stage, f.error)))?;

    let run_file = config.runs_dir().join(format!("{}.run", result.run_id));
    result.save(&run_file).map_err(Failure::runtime)?;
    if result.report_item.is_some() {
        store.snapshot_save(&path).map_err(Failure::runtime)?;
    }
    if machine {
        write_line(
            out,
            json!({"record": "run", "run_id": result.run_id, "run_file": run_file, "report": result.report}),
        )
    } else {
        write_line(out, render::run_report(&result))?;
        write_line(out, format!("run file: {}", run_file.display()))
    }
}

fn show_run(cli: &Cli, run_file: &Path, out: &mut impl Write) -> Result<(), Failure> {
    let result = RunResult::load(run_file).map_err(Failure::runtime)?;
    if cli.machine {
        write_line(out, json!({"record": "report", "report": result.report}))?;
        for (revision, round) in result.rounds.iter().enumerate() {
            write_line(out, render::round_record(revision, round))?;
        }
        Ok(())
    } else {
        write_line(out, render::run_report(&result))
    }
}
