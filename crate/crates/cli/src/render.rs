//! Human-readable output.

use std::fmt::Write;

use archon_core::agents::{ProgressEvent, RunResult, SearchRound};
use archon_core::knowledge::RankedEntry;
use serde_json::{json, Value};

pub fn ranked_line(rank: usize, entry: &RankedEntry) -> String {
    format!(
        "{rank:>2}. {:.4} (cos {:.4})  {:<24} {:<18} {:<20} {}",
        entry.final_score,
        entry.cosine_score,
        entry.item_id,
        entry.resource_type.as_str(),
        entry.facet_type.as_str(),
        entry.text
    )
}

pub fn event_line(event: &ProgressEvent) -> String {
    match event {
        ProgressEvent::StageEntered { stage, revision } => format!("[revision {revision}] {stage}"),
        ProgressEvent::GenerationCompleted {
            revision,
            generation,
            best_score,
            best_genotype,
        } => format!("[revision {revision}] generation {generation}: best {best_score:.4} {best_genotype}"),
        ProgressEvent::DecisionMade {
            revision,
            verdict,
            hints,
            forced,
        } => {
            let hints: Vec<&str> = hints.iter().map(|h| h.as_str()).collect();
            let forced = if *forced { " (revision budget spent)" } else { "" };
            format!("[revision {revision}] review: {verdict}{forced} {}", hints.join(",")).trim_end().to_string()
        }
        ProgressEvent::ReportStored { run_id, item_id } => match item_id {
            Some(item) => format!("report for {run_id} stored as {item}"),
            None => format!("report for {run_id} compiled"),
        },
    }
}

fn round_summary(round: &SearchRound) -> String {
    let config = &round.config;
    let ops: Vec<&str> = config.space.allowed_ops.iter().map(|o| o.as_str()).collect();
    let shape = match config.algorithm {
        archon_core::gateway::schema::Algorithm::Evolutionary => {
            format!("{}x{}", config.population, config.generations)
        }
        archon_core::gateway::schema::Algorithm::Random => format!("{} samples", config.samples),
    };
    let best = round.trace.best().map_or(0.0, |s| s.score);
    let hints: Vec<&str> = round.decision.hints.iter().map(|h| h.as_str()).collect();
    format!(
        "{} {shape}, ops {}, {} evals, best {best:.4}, {} {}",
        config.algorithm,
        ops.join(","),
        round.trace.evals_used,
        round.decision.verdict,
        hints.join(",")
    )
    .trim_end()
    .to_string()
}

pub fn round_record(revision: usize, round: &SearchRound) -> Value {
    json!({
        "record": "round",
        "revision": revision,
        "algorithm": round.config.algorithm,
        "allowed_ops": round.config.space.allowed_ops,
        "population": round.config.population,
        "generations": round.config.generations,
        "evals_used": round.trace.evals_used,
        "best_score": round.trace.best().map(|s| s.score),
        "verdict": round.decision.verdict,
        "hints": round.decision.hints,
        "forced": round.decision.forced,
    })
}

pub fn run_report(result: &RunResult) -> String {
    let report = &result.report;
    let plan = &report.plan;
    let mut s = String::new();
    let _ = writeln!(s, "run {} (seed {})", report.run_id, result.seed);
    let _ = writeln!(s, "instruction: {}", result.instruction);
    let requested = if plan.requested_dataset != plan.dataset {
        format!(" (requested {})", plan.requested_dataset)
    } else {
        String::new()
    };
    let direction = if plan.higher_is_better { "higher" } else { "lower" };
    let _ = writeln!(
        s,
        "task: {} on {}{requested}, metric {} ({direction} is better)",
        plan.task_type, plan.dataset, plan.metric
    );
    let _ = writeln!(
        s,
        "budget: {} candidates, {} revisions, {} seeds per evaluation",
        plan.budget.max_candidates, plan.budget.max_revisions, plan.budget.seeds_per_eval
    );
    let _ = writeln!(s, "designed GNN: {}", report.best_genotype);
    let _ = writeln!(
        s,
        "performance: {} {:.4} +/- {:.4}",
        plan.metric, report.metric_mean, report.metric_std
    );
    let _ = writeln!(
        s,
        "resource usage: {} evaluations, {} tokens, {} ms",
        report.resource.evals, report.resource.token_estimate, report.resource.wall_ms
    );
    let features: Vec<&str> = report.feature_plan.iter().map(|d| d.as_str()).collect();
    let features = if features.is_empty() { "none".to_string() } else { features.join(", ") };
    let _ = writeln!(s, "feature plan: {features}");
    let _ = writeln!(s, "revisions: {}", report.revisions_used);
    for (revision, round) in result.rounds.iter().enumerate() {
        let _ = writeln!(s, "  round {revision}: {}", round_summary(round));
    }
    if let Some(item) = &result.report_item {
        let _ = writeln!(s, "knowledge item: {item}");
    }
    let _ = write!(s, "summary: {}", report.summary);
    s
}
