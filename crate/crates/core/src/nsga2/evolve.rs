use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use super::{
    assign_rank_and_crowding, select_survivors, tournament_select, ConfigError, Individual, NsgaConfig, RunArchive,
};
use crate::evaluation::{Dispatcher, EvalRequest, EvaluationRecord};
use crate::metrics::RefPoint;
use crate::search_space::{Candidate, SearchSpace};
use crate::seed::rng_from_seed;

/// Per-generation view handed to a [`RunObserver`].
#[derive(Debug)]
pub struct GenerationSnapshot<'a> {
    /// 0 is the initial population.
    pub generation: usize,
    /// Largest `w_quality * quality + w_time * time_s` in the population.
    pub best_scalar: f64,
    pub population: &'a [Individual],
    /// Backend evaluations so far.
    pub evaluations: usize,
}

impl GenerationSnapshot<'_> {
    pub fn front(&self) -> impl Iterator<Item = &Individual> {
        self.population.iter().filter(|i| i.rank == 0)
    }
}

/// Hooks for logging and timestamps. Both methods have no-op defaults.
pub trait RunObserver {
    fn on_generation(&mut self, _snapshot: &GenerationSnapshot<'_>) {}

    /// Wall-clock time stamped onto evaluation records.
    fn now_unix_ms(&mut self) -> Option<u64> {
        None
    }
}

impl RunObserver for () {}

struct Run<'s, 'd, 'e, 'o> {
    space: &'s SearchSpace,
    base_prompt: &'s str,
    dispatcher: &'d mut Dispatcher<'e>,
    observer: &'o mut dyn RunObserver,
    evaluator_id: String,
    records: Vec<EvaluationRecord>,
}

impl Run<'_, '_, '_, '_> {
    fn evaluate(&mut self, generation: usize, candidates: Vec<Candidate>) -> Result<Vec<Individual>, String> {
        let requests: Vec<EvalRequest> = candidates
            .into_iter()
            .enumerate()
            .map(|(i, c)| EvalRequest::new(format!("g{generation}-{i}"), c, self.base_prompt, self.space))
            .collect();
        let results = self.dispatcher.evaluate_batch(&requests);
        let stamp = self.observer.now_unix_ms();
        let mut failure = None;
        let mut individuals = Vec::with_capacity(requests.len());
        for (req, d) in requests.into_iter().zip(results) {
            match d.result.outcome {
                Ok(obj) => {
                    if d.fresh {
                        self.records.push(EvaluationRecord {
                            generation,
                            candidate: req.candidate.clone(),
                            time_ms: obj.time_ms,
                            quality: obj.quality,
                            evaluator_id: self.evaluator_id.clone(),
                            wall_clock_ms: stamp,
                        });
                    }
                    individuals.push(Individual::new(req.candidate, obj));
                }
                Err(e) => {
                    failure.get_or_insert_with(|| format!("evaluation {} failed: {e}", req.id));
                }
            }
        }
        match failure {
            Some(f) => Err(f),
            None => Ok(individuals),
        }
    }

    fn notify(&mut self, generation: usize, population: &[Individual], config: &NsgaConfig) {
        let best_scalar =
            population.iter().map(|i| i.objectives.scalar(&config.weights)).fold(f64::NEG_INFINITY, f64::max);
        let snapshot = GenerationSnapshot { generation, best_scalar, population, evaluations: self.records.len() };
        self.observer.on_generation(&snapshot);
    }
}

fn make_offspring<R: Rng + ?Sized>(
    space: &SearchSpace,
    population: &[Individual],
    config: &NsgaConfig,
    rng: &mut R,
) -> Vec<Candidate> {
    let n = config.population_size;
    let mut offspring = Vec::with_capacity(n);
    while offspring.len() < n {
        let a = &population[tournament_select(population, rng)].candidate;
        let b = &population[tournament_select(population, rng)].candidate;
        let (c1, c2) =
            if rng.gen_bool(config.crossover_rate) { space.crossover(a, b, rng) } else { (a.clone(), b.clone()) };
        offspring.push(space.mutate(&c1, config.mutation_rate, rng));
        if offspring.len() < n {
            offspring.push(space.mutate(&c2, config.mutation_rate, rng));
        }
    }
    offspring
}

fn distinct_front(population: &[Individual]) -> Vec<Individual> {
    let mut seen = BTreeSet::new();
    population.iter().filter(|i| i.rank == 0 && seen.insert(i.candidate.cache_key())).cloned().collect()
}

/// Runs the evolutionary loop.
///
/// The initial population of `population_size` random candidates is evaluated, then each of
/// `generations` iterations breeds as many offspring (binary tournament, crossover with
/// probability `crossover_rate` else cloning, per-gene mutation at `mutation_rate`), evaluates
/// them, and keeps the best `population_size` of parents plus offspring by front and crowding
/// distance.
///
/// An evaluation that still fails after the dispatcher's retries stops the run; the archive is
/// then returned with `complete == false` and holds everything recorded up to that point.
pub fn evolve(
    space: &SearchSpace,
    base_prompt: &str,
    dispatcher: &mut Dispatcher<'_>,
    config: &NsgaConfig,
    observer: &mut dyn RunObserver,
) -> Result<RunArchive, ConfigError> {
    config.validate()?;
    let mut rng = rng_from_seed(config.master_seed);
    let evaluator_id = dispatcher.evaluator_id();
    let mut run =
        Run { space, base_prompt, dispatcher, observer, evaluator_id: evaluator_id.clone(), records: Vec::new() };

    let initial: Vec<Candidate> = (0..config.population_size).map(|_| space.sample_random(&mut rng)).collect();
    let mut population: Vec<Individual> = Vec::new();
    let mut failure = None;
    match run.evaluate(0, initial) {
        Ok(mut pop) => {
            assign_rank_and_crowding(&mut pop, config);
            run.notify(0, &pop, config);
            population = pop;
        }
        Err(e) => failure = Some(e),
    }

    if failure.is_none() {
        for generation in 1..=config.generations {
            let offspring = make_offspring(space, &population, config, &mut rng);
            match run.evaluate(generation, offspring) {
                Ok(children) => {
                    let mut merged = core::mem::take(&mut population);
                    merged.extend(children);
                    population = select_survivors(merged, config.population_size, config);
                    run.notify(generation, &population, config);
                }
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
    }

    Ok(RunArchive {
        config: config.clone(),
        space: space.clone(),
        base_prompt: base_prompt.into(),
        evaluator_id,
        ref_point: RefPoint::default(),
        records: run.records,
        final_front: distinct_front(&population),
        complete: failure.is_none(),
        failure,
    })
}
