//! Evolutionary and random search over a [`SearchSpace`].

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::codec::encode;
use super::genotype::ArchGenotype;
use super::space::{sample, validate, SearchSpace};
use super::variation::{crossover, mutate};
use crate::eval::EvalError;
use crate::rng::SplitMix64;

/// Scores a genotype; higher is better.
pub trait Evaluator: Sync {
    fn evaluate(&self, genotype: &ArchGenotype) -> Result<f64, EvalError>;
}

impl<F> Evaluator for F
where
    F: Fn(&ArchGenotype) -> Result<f64, EvalError> + Sync,
{
    fn evaluate(&self, genotype: &ArchGenotype) -> Result<f64, EvalError> {
        self(genotype)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveParams {
    pub population: usize,
    pub generations: usize,
    pub elite_fraction: f64,
    pub tournament: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    /// Evaluate each generation's new genotypes on the rayon pool.
    #[serde(default)]
    pub parallel: bool,
}

impl EvolveParams {
    pub fn new(population: usize, generations: usize) -> Self {
        Self {
            population,
            generations,
            ..Self::default()
        }
    }

    pub fn elite_count(&self) -> usize {
        ((self.population as f64 * self.elite_fraction).ceil() as usize).clamp(1, self.population)
    }
}

impl Default for EvolveParams {
    fn default() -> Self {
        Self {
            population: 16,
            generations: 10,
            elite_fraction: 0.1,
            tournament: 2,
            crossover_rate: 0.7,
            mutation_rate: 0.9,
            parallel: false,
        }
    }
}

/// Population size and generation count, the two budget knobs of [`evolve`].
pub type EvolveBudget = EvolveParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub genotype: ArchGenotype,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    pub population: Vec<Scored>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalFailure {
    pub genotype: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub generations: Vec<Generation>,
    pub best_per_generation: Vec<Scored>,
    /// Population slots scored; cache hits count but are not re-evaluated.
    pub evals_used: usize,
    /// Distinct genotypes actually sent to the evaluator.
    pub evaluator_calls: usize,
    pub failures: Vec<EvalFailure>,
}

impl SearchTrace {
    pub fn best(&self) -> Option<&Scored> {
        self.best_per_generation.last()
    }
}

/// Descending score, then ascending canonical encoding.
fn rank(a: &(f64, String), b: &(f64, String)) -> Ordering {
    b.0.partial_cmp(&a.0)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.1.cmp(&b.1))
}

struct Scorer<'a, E: Evaluator + ?Sized> {
    evaluator: &'a E,
    parallel: bool,
    cache: HashMap<String, f64>,
    calls: usize,
    failures: Vec<EvalFailure>,
}

impl<'a, E: Evaluator + ?Sized> Scorer<'a, E> {
    fn new(evaluator: &'a E, parallel: bool) -> Self {
        Self {
            evaluator,
            parallel,
            cache: HashMap::new(),
            calls: 0,
            failures: Vec::new(),
        }
    }

    /// Evaluates uncached genotypes in canonical-encoding order so results
    /// do not depend on scheduling.
    fn score(&mut self, genotypes: Vec<ArchGenotype>) -> Vec<Scored> {
        let mut pending: BTreeMap<String, &ArchGenotype> = BTreeMap::new();
        for g in &genotypes {
            let key = encode(g);
            if !self.cache.contains_key(&key) {
                pending.entry(key).or_insert(g);
            }
        }
        let jobs: Vec<(String, &ArchGenotype)> = pending.into_iter().collect();
        let run = |(key, g): &(String, &ArchGenotype)| (key.clone(), self.evaluator.evaluate(g));
        let results: Vec<(String, Result<f64, EvalError>)> = if self.parallel {
            jobs.par_iter().map(run).collect()
        } else {
            jobs.iter().map(run).collect()
        };
        self.calls += results.len();
        for (key, result) in results {
            let score = match result {
                Ok(s) if s.is_finite() => s,
                Ok(s) => {
                    self.failures.push(EvalFailure {
                        genotype: key.clone(),
                        message: format!("non-finite score {s}"),
                    });
                    0.0
                }
                Err(e) => {
                    self.failures.push(EvalFailure {
                        genotype: key.clone(),
                        message: e.to_string(),
                    });
                    0.0
                }
            };
            self.cache.insert(key, score);
        }
        genotypes
            .into_iter()
            .map(|g| {
                let score = self.cache[&encode(&g)];
                Scored { genotype: g, score }
            })
            .collect()
    }
}

fn best_of(population: &[Scored]) -> Scored {
    population
        .iter()
        .map(|s| (s, (s.score, encode(&s.genotype))))
        .min_by(|a, b| rank(&a.1, &b.1))
        .map(|(s, _)| s.clone())
        .expect("population is never empty")
}

fn tournament<'p>(population: &'p [Scored], size: usize, rng: &mut SplitMix64) -> &'p Scored {
    let mut winner = &population[rng.below(population.len())];
    for _ in 1..size.max(1) {
        let challenger = &population[rng.below(population.len())];
        let ord = rank(
            &(challenger.score, encode(&challenger.genotype)),
            &(winner.score, encode(&winner.genotype)),
        );
        if ord == Ordering::Less {
            winner = challenger;
        }
    }
    winner
}

/// Elitist generational search.
///
/// Generation 0 holds the valid seeds (deduplicated by canonical encoding,
/// at most `population`) padded with samples. Each later generation keeps the
/// top `ceil(population * elite_fraction)` individuals and fills the rest by
/// tournament selection, optional crossover, then optional mutation.
/// Evaluation failures score 0 and are recorded in the trace.
pub fn evolve<E: Evaluator + ?Sized>(
    space: &SearchSpace,
    evaluator: &E,
    params: &EvolveParams,
    seeds: &[ArchGenotype],
    rng: &mut SplitMix64,
    on_generation: &mut dyn FnMut(usize, &Scored),
) -> SearchTrace {
    assert!(params.population >= 2, "population must be at least 2");
    assert!(params.generations >= 1, "at least one generation is required");
    let size = params.population;
    let mut scorer = Scorer::new(evaluator, params.parallel);

    let mut initial: Vec<ArchGenotype> = Vec::with_capacity(size);
    let mut seen = std::collections::HashSet::new();
    for seed in seeds {
        if initial.len() == size {
            break;
        }
        if validate(seed, space.task_type, space).is_empty() && seen.insert(encode(seed)) {
            initial.push(seed.clone());
        }
    }
    while initial.len() < size {
        initial.push(sample(space, rng));
    }

    let mut population = scorer.score(initial);
    let mut generations = Vec::with_capacity(params.generations);
    let mut best_per_generation = Vec::with_capacity(params.generations);

    for gen in 0..params.generations {
        if gen > 0 {
            let mut order: Vec<(usize, (f64, String))> = population
                .iter()
                .enumerate()
                .map(|(i, s)| (i, (s.score, encode(&s.genotype))))
                .collect();
            order.sort_by(|a, b| rank(&a.1, &b.1));
            let elites: Vec<Scored> = order
                .iter()
                .take(params.elite_count())
                .map(|(i, _)| population[*i].clone())
                .collect();

            let mut children = Vec::with_capacity(size - elites.len());
            while elites.len() + children.len() < size {
                let first = tournament(&population, params.tournament, rng);
                let mut child = if rng.chance(params.crossover_rate) {
                    let second = tournament(&population, params.tournament, rng);
                    crossover(&first.genotype, &second.genotype, rng)
                } else {
                    first.genotype.clone()
                };
                if rng.chance(params.mutation_rate) {
                    child = mutate(&child, space, rng).genotype;
                }
                children.push(child);
            }
            let mut next = elites;
            next.extend(scorer.score(children));
            population = next;
        }
        let best = best_of(&population);
        on_generation(gen, &best);
        best_per_generation.push(best);
        generations.push(Generation {
            population: population.clone(),
        });
    }

    SearchTrace {
        generations,
        best_per_generation,
        evals_used: size * params.generations,
        evaluator_calls: scorer.calls,
        failures: scorer.failures,
    }
}

/// Uniform sampling baseline. Samples are grouped into generations of
/// `batch` for reporting; `best_per_generation` is the running best.
pub fn random_search<E: Evaluator + ?Sized>(
    space: &SearchSpace,
    evaluator: &E,
    samples: usize,
    batch: usize,
    rng: &mut SplitMix64,
    on_generation: &mut dyn FnMut(usize, &Scored),
) -> SearchTrace {
    assert!(samples >= 1, "random search needs at least one sample");
    let batch = batch.max(1);
    let mut scorer = Scorer::new(evaluator, false);
    let mut generations = Vec::new();
    let mut best_per_generation: Vec<Scored> = Vec::new();
    let mut remaining = samples;
    while remaining > 0 {
        let n = remaining.min(batch);
        remaining -= n;
        let drawn: Vec<ArchGenotype> = (0..n).map(|_| sample(space, rng)).collect();
        let population = scorer.score(drawn);
        let mut candidates = population.clone();
        if let Some(prev) = best_per_generation.last() {
            candidates.push(prev.clone());
        }
        let best = best_of(&candidates);
        on_generation(generations.len(), &best);
        best_per_generation.push(best);
        generations.push(Generation { population });
    }
    SearchTrace {
        generations,
        best_per_generation,
        evals_used: samples,
        evaluator_calls: scorer.calls,
        failures: scorer.failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{Op, TaskType};

    fn count_gcn(g: &ArchGenotype) -> Result<f64, EvalError> {
        let gcn = g.layers.iter().filter(|op| **op == Op::Gcn).count();
        Ok(gcn as f64 / g.layers.len() as f64)
    }

    fn no_op(_: usize, _: &Scored) {}

    #[test]
    fn single_generation_best_is_initial_max() {
        let space = SearchSpace::full(TaskType::NodeClassification);
        let trace = evolve(
            &space,
            &count_gcn,
            &EvolveParams::new(8, 1),
            &[],
            &mut SplitMix64::new(4),
            &mut no_op,
        );
        let max = trace.generations[0]
            .population
            .iter()
            .map(|s| s.score)
            .fold(f64::MIN, f64::max);
        assert_eq!(trace.best().unwrap().score, max);
        assert_eq!(trace.evals_used, 8);
    }

    #[test]
    fn seeds_are_deduplicated_and_lead_generation_zero() {
        let space = SearchSpace::full(TaskType::NodeClassification);
        let seed = crate::arch::decode(
            "v1;ops=gcn,gcn;dim=64;act=relu;drop=0.50;skips=;pool=none;lr=0.005;wd=0.0005;ep=200",
        )
        .unwrap();
        let trace = evolve(
            &space,
            &count_gcn,
            &EvolveParams::new(4, 1),
            &[seed.clone(), seed.clone()],
            &mut SplitMix64::new(9),
            &mut no_op,
        );
        let pop = &trace.generations[0].population;
        assert_eq!(pop[0].genotype, seed);
        assert_ne!(pop[1].genotype, seed);
        assert_eq!(pop.len(), 4);
    }

    #[test]
    fn failures_score_zero_and_search_continues() {
        let space = SearchSpace::full(TaskType::NodeClassification);
        let flaky = |g: &ArchGenotype| {
            if g.layers[0] == Op::Linear {
                Err(EvalError::Timeout { millis: 1000 })
            } else {
                Ok(0.5)
            }
        };
        let trace = evolve(
            &space,
            &flaky,
            &EvolveParams::new(12, 4),
            &[],
            &mut SplitMix64::new(2),
            &mut no_op,
        );
        assert_eq!(trace.generations.len(), 4);
        for f in &trace.failures {
            assert!(f.genotype.starts_with("v1;ops=linear"));
        }
        for gen in &trace.generations {
            for s in &gen.population {
                if s.genotype.layers[0] == Op::Linear {
                    assert_eq!(s.score, 0.0);
                }
            }
        }
    }

    #[test]
    fn parallel_and_serial_traces_match() {
        let space = SearchSpace::full(TaskType::NodeClassification);
        let mut serial = EvolveParams::new(10, 5);
        let mut parallel = serial;
        parallel.parallel = true;
        serial.parallel = false;
        let a = evolve(&space, &count_gcn, &serial, &[], &mut SplitMix64::new(1), &mut no_op);
        let b = evolve(&space, &count_gcn, &parallel, &[], &mut SplitMix64::new(1), &mut no_op);
        assert_eq!(a, b);
    }

    #[test]
    fn random_search_running_best() {
        let space = SearchSpace::full(TaskType::NodeClassification);
        let trace = random_search(&space, &count_gcn, 40, 16, &mut SplitMix64::new(3), &mut no_op);
        assert_eq!(trace.generations.len(), 3);
        assert_eq!(trace.evals_used, 40);
        assert!(trace
            .best_per_generation
            .windows(2)
            .all(|w| w[1].score >= w[0].score));
    }
}
