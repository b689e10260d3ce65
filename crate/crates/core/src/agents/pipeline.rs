//! The full run: plan, profile, features, configure, search, review, with a
//! bounded revision loop, then the report.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::steps::{apply_hints, Agents};
use super::types::*;
use crate::arch::{encode, evolve, random_search, validate, EvolveParams, Scored, SearchTrace};
use crate::gateway::schema::{Algorithm, Hint, Verdict};
use crate::hash::fnv1a64;
use crate::rng::SplitMix64;

pub const RUN_FILE_HEADER: &str = "archon-run v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSettings {
    pub seed: u64,
    /// Store the compiled report in the experiment knowledge base.
    pub update_experiment_kb: bool,
    /// Selection and variation constants; population and generation counts
    /// come from each round's search configuration.
    pub evolution: EvolveParams,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        Self {
            seed: 42,
            update_experiment_kb: true,
            evolution: EvolveParams::default(),
        }
    }
}

struct Recorder<'s> {
    events: Vec<ProgressEvent>,
    sink: &'s mut dyn FnMut(&ProgressEvent),
}

impl Recorder<'_> {
    fn emit(&mut self, event: ProgressEvent) {
        (self.sink)(&event);
        self.events.push(event);
    }

    fn stage(&mut self, stage: PipelineStage, revision: usize) {
        self.emit(ProgressEvent::StageEntered { stage, revision });
    }
}

/// Run ids hash the seed, the instruction and the knowledge base sizes, so
/// a fresh setup reproduces its id while every stored report changes it.
pub fn run_id(seed: u64, instruction: &str, prior_items: usize, experiment_items: usize) -> String {
    let key = format!("{seed}\n{instruction}\n{prior_items}\n{experiment_items}");
    format!("run-{:016x}", fnv1a64(key.as_bytes()))
}

impl Agents<'_> {
    fn search(
        &self,
        config: &crate::agents::SearchConfig,
        features: &FeaturePlan,
        plan: &TaskPlan,
        settings: &PipelineSettings,
        revision: usize,
        recorder: &mut Recorder<'_>,
    ) -> SearchTrace {
        let seeds = plan.eval_seeds();
        let evaluator = self.backend.evaluator(&plan.dataset, &features.directives, &seeds);
        let mut rng = SplitMix64::derive(settings.seed, revision as u64);
        let mut on_generation = |generation: usize, best: &Scored| {
            recorder.emit(ProgressEvent::GenerationCompleted {
                revision,
                generation,
                best_score: best.score,
                best_genotype: encode(&best.genotype),
            });
        };
        match config.algorithm {
            Algorithm::Evolutionary => {
                let params = EvolveParams {
                    population: config.population,
                    generations: config.generations,
                    ..settings.evolution
                };
                evolve(
                    &config.space,
                    &evaluator,
                    &params,
                    &config.seed_genotypes,
                    &mut rng,
                    &mut on_generation,
                )
            }
            Algorithm::Random => random_search(
                &config.space,
                &evaluator,
                config.samples,
                config.population,
                &mut rng,
                &mut on_generation,
            ),
        }
    }

    /// Runs the whole pipeline. Progress events go to `sink` as they happen
    /// and are also kept in the result.
    pub fn run_pipeline(
        &self,
        instruction: &str,
        settings: &PipelineSettings,
        sink: &mut dyn FnMut(&ProgressEvent),
    ) -> Result<RunResult, PipelineFailure> {
        let mark = self.gateway.transcript().len();
        let started = self.gateway.clock().now_ms();
        let mut recorder = Recorder { events: Vec::new(), sink };
        let outcome = self.run_inner(instruction, settings, &mut recorder, mark, started);
        let transcript = self.gateway.transcript().since(mark);
        match outcome {
            Ok(mut result) => {
                result.events = recorder.events;
                result.transcript = transcript;
                Ok(result)
            }
            Err(error) => Err(PipelineFailure {
                stage: error.stage(),
                error,
                events: recorder.events,
                transcript,
            }),
        }
    }

    fn run_inner(
        &self,
        instruction: &str,
        settings: &PipelineSettings,
        recorder: &mut Recorder<'_>,
        mark: usize,
        started: u64,
    ) -> Result<RunResult, AgentError> {
        let run_id = run_id(
            settings.seed,
            instruction,
            self.store.prior_count(),
            self.store.experiment_count(),
        );

        recorder.stage(PipelineStage::Plan, 0);
        let plan = self.plan(instruction)?;

        recorder.stage(PipelineStage::Profile, 0);
        let profile = self.profile(&plan)?;

        recorder.stage(PipelineStage::Features, 0);
        let mut features = self.propose_features(&plan, &profile, None)?;

        recorder.stage(PipelineStage::Configure, 0);
        let mut config = self.configure_search(&plan, &profile)?;

        let mut rounds: Vec<SearchRound> = Vec::new();
        let mut revision = 0;
        loop {
            recorder.stage(PipelineStage::Search, revision);
            let trace = self.search(&config, &features, &plan, settings, revision, recorder);

            recorder.stage(PipelineStage::Review, revision);
            let decision = self.review(&trace, &plan, revision)?;
            recorder.emit(ProgressEvent::DecisionMade {
                revision,
                verdict: decision.verdict,
                hints: decision.hints.clone(),
                forced: decision.forced,
            });
            let verdict = decision.verdict;
            let hints = decision.hints.clone();
            rounds.push(SearchRound {
                feature_plan: features.clone(),
                config: config.clone(),
                trace,
                decision,
            });
            if verdict == Verdict::Accept {
                break;
            }
            revision += 1;
            if hints.contains(&Hint::AdjustFeatures) {
                recorder.stage(PipelineStage::Features, revision);
                features = self.propose_features(&plan, &profile, Some(Hint::AdjustFeatures))?;
            }
            let mut next = apply_hints(&config, &hints);
            if let Some((best, _)) = best_overall(&rounds) {
                if validate(&best.genotype, plan.task_type, &next.space).is_empty()
                    && !next.seed_genotypes.contains(&best.genotype)
                {
                    next.seed_genotypes.insert(0, best.genotype.clone());
                }
            }
            config = next;
        }

        recorder.stage(PipelineStage::Report, revision);
        let (best, round) = best_overall(&rounds).ok_or_else(|| AgentError::Report("no candidates".into()))?;
        let best = best.clone();
        let best_features = rounds[round].feature_plan.clone();
        let (metric_mean, metric_std) = self.final_evaluation(&plan, &best.genotype, &best_features, best.score);
        let evals = rounds.iter().map(|r| r.trace.evals_used).sum::<usize>() + 1;
        let mut report = ExperimentReport {
            run_id: run_id.clone(),
            plan: plan.clone(),
            best_genotype: encode(&best.genotype),
            metric_mean,
            metric_std,
            revisions_used: revision,
            resource: ResourceUsage::default(),
            feature_plan: best_features.directives.clone(),
            summary: String::new(),
        };
        report.summary = self.summarize_report(&report)?;
        report.resource = ResourceUsage {
            wall_ms: self.gateway.clock().now_ms().saturating_sub(started),
            evals,
            token_estimate: self
                .gateway
                .transcript()
                .since(mark)
                .iter()
                .map(|e| e.token_estimate())
                .sum(),
        };
        let report_item = if settings.update_experiment_kb {
            Some(self.store_report(&report)?)
        } else {
            None
        };
        recorder.emit(ProgressEvent::ReportStored {
            run_id: run_id.clone(),
            item_id: report_item.clone(),
        });
        Ok(RunResult {
            run_id,
            instruction: instruction.to_string(),
            seed: settings.seed,
            plan,
            profile,
            rounds,
            report,
            report_item,
            events: Vec::new(),
            transcript: Vec::new(),
        })
    }
}

/// Highest-scoring candidate over all rounds; earlier rounds win ties.
fn best_overall(rounds: &[SearchRound]) -> Option<(&Scored, usize)> {
    let mut best: Option<(&Scored, usize)> = None;
    for (i, round) in rounds.iter().enumerate() {
        if let Some(candidate) = round.trace.best() {
            if best.is_none_or(|(b, _)| candidate.score > b.score) {
                best = Some((candidate, i));
            }
        }
    }
    best
}

#[derive(Debug, Error)]
pub enum RunFileError {
    #[error("not a run file: expected header `{RUN_FILE_HEADER}`, found {0:?}")]
    Header(String),
    #[error("run file body is malformed: {0}")]
    Body(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl RunResult {
    /// Header line followed by the result as pretty-printed JSON.
    pub fn to_run_file(&self) -> String {
        let body = serde_json::to_string_pretty(self).expect("run results serialize");
        format!("{RUN_FILE_HEADER}\n{body}\n")
    }

    pub fn from_run_file(text: &str) -> Result<Self, RunFileError> {
        let (header, body) = text.split_once('\n').unwrap_or((text, ""));
        if header.trim_end_matches('\r') != RUN_FILE_HEADER {
            return Err(RunFileError::Header(header.chars().take(40).collect()));
        }
        serde_json::from_str(body).map_err(|e| RunFileError::Body(e.to_string()))
    }

    /// Writes the run file, creating missing parent directories.
    pub fn save(&self, path: &std::path::Path) -> Result<(), RunFileError> {
        let io = |e: std::io::Error| RunFileError::Io(format!("{}: {e}", path.display()));
        if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        std::fs::write(path, self.to_run_file()).map_err(io)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, RunFileError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| RunFileError::Io(format!("{}: {e}", path.display())))?;
        Self::from_run_file(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_ids_track_store_growth() {
        let a = run_id(42, "x", 3, 0);
        assert_eq!(a, run_id(42, "x", 3, 0));
        assert_ne!(a, run_id(42, "x", 3, 1));
        assert_ne!(a, run_id(43, "x", 3, 0));
        assert!(a.starts_with("run-") && a.len() == 20);
    }

    #[test]
    fn run_file_header_is_checked() {
        assert!(matches!(RunResult::from_run_file("archon-run v2\n{}"), Err(RunFileError::Header(_))));
        assert!(matches!(RunResult::from_run_file("archon-run v1\n{}"), Err(RunFileError::Body(_))));
    }
}
