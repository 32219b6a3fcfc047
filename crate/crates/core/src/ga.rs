//! Two-stage genetic algorithm.
//!
//! Stage one evolves scheduling orders ([`HardIndividual`]) until the greedy
//! decoder produces a timetable without hard violations. Stage two starts from
//! that timetable and evolves room-period genomes ([`SoftIndividual`]) under
//! the soft-stage fitness `1000 * hard + soft`.
//!
//! Each generation produces `offspring_count` children with the varOr scheme
//! (every child comes from exactly one of crossover, mutation or cloning),
//! evaluates all of them, and selects the next population by tournament from
//! parents and children. The best individual found so far is reinserted if
//! selection drops it.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DatasetError;
use crate::encoding::{EncodingError, Genome, HardIndividual, MoveMode, SoftIndividual};
use crate::evaluation::{evaluate, hard_violations, Label, Stage, Timetable, ViolationReport};
use crate::instance::Instance;

#[derive(Debug, Error)]
pub enum GaError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("population is empty")]
    EmptyPopulation,
    #[error("parents have different lengths ({0} and {1})")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error("evaluation sink failed: {0}")]
    Sink(#[from] DatasetError),
    #[error("failed to build thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population_size: usize,
    pub offspring_count: usize,
    pub crossover_probability: f64,
    pub mutation_probability: f64,
    pub tournament_size: usize,
    /// Stagnant generations after which the soft stage toggles between
    /// simple and chain moves.
    pub non_improving_switch: usize,
    pub stop_non_improving: usize,
    /// Evaluation budget shared by both stages.
    pub max_evaluations: u64,
    pub target_fitness: Option<u64>,
    pub rng_seed: u64,
    /// Worker threads for offspring evaluation; 1 runs serially.
    pub threads: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 50,
            offspring_count: 100,
            crossover_probability: 0.6,
            mutation_probability: 0.3,
            tournament_size: 3,
            non_improving_switch: 10,
            stop_non_improving: 100,
            max_evaluations: 500_000,
            target_fitness: None,
            rng_seed: 0,
            threads: 1,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), GaError> {
        let fail = |m: &str| Err(GaError::Config(m.to_owned()));
        if self.population_size == 0 {
            return fail("population_size must be positive");
        }
        if self.offspring_count == 0 {
            return fail("offspring_count must be positive");
        }
        if self.tournament_size == 0 {
            return fail("tournament_size must be positive");
        }
        if self.non_improving_switch == 0 || self.stop_non_improving == 0 {
            return fail("stagnation counts must be positive");
        }
        let (cx, mu) = (self.crossover_probability, self.mutation_probability);
        if !(0.0..=1.0).contains(&cx) || !(0.0..=1.0).contains(&mu) || cx + mu > 1.0 + 1e-12 {
            return fail(
                "crossover and mutation probabilities must lie in [0, 1] and sum to at most 1",
            );
        }
        if self.threads == 0 {
            return fail("threads must be positive");
        }
        Ok(())
    }
}

/// A genome with its fitness and feasibility.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scored<G> {
    pub genome: G,
    pub fitness: u64,
    pub label: Label,
}

/// Receives every fitness evaluation performed by the algorithm, in order.
pub trait EvaluationSink {
    fn record(
        &mut self,
        stage: Stage,
        genes: &[usize],
        fitness: u64,
        label: Label,
    ) -> Result<(), DatasetError>;
}

/// Discards all evaluations.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl EvaluationSink for NullSink {
    fn record(&mut self, _: Stage, _: &[usize], _: u64, _: Label) -> Result<(), DatasetError> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRow {
    pub generation: usize,
    pub stage: Stage,
    pub evaluations: u64,
    pub best_fitness: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvolutionTrace {
    pub rows: Vec<TraceRow>,
}

impl EvolutionTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("generation,stage,evaluations,best_fitness\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.generation, r.stage, r.evaluations, r.best_fitness
            ));
        }
        out
    }

    pub fn stage_rows(&self, stage: Stage) -> impl Iterator<Item = &TraceRow> {
        self.rows.iter().filter(move |r| r.stage == stage)
    }

    fn extend(&mut self, other: EvolutionTrace) {
        self.rows.extend(other.rows);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Feasible,
    Stagnation,
    Budget,
}

/// Which operator produced an offspring in [`var_or`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operator {
    Crossover,
    Mutation,
    Reproduction,
}

/// Moves one random gene to a different random allele.
pub fn mutate<G: Genome>(
    instance: &Instance,
    individual: &mut G,
    mode: MoveMode,
    rng: &mut impl Rng,
) -> Result<(), GaError> {
    let n = individual.genes().len();
    let count = G::allele_count(instance);
    if n == 0 || count < 2 {
        return Ok(());
    }
    let position = rng.gen_range(0..n);
    let current = individual.genes()[position];
    let mut allele = rng.gen_range(0..count - 1);
    if allele >= current {
        allele += 1;
    }
    individual.apply_move(instance, position, allele, mode)?;
    Ok(())
}

/// Single point crossover built from neighbourhood moves.
///
/// The first offspring is `one` with its first half moved gene by gene onto
/// the alleles of `two`; the second is `one` with its second half moved onto
/// the alleles of `two`. With disjoint allele sets this is the textbook
/// exchange of halves.
pub fn single_point_crossover<G: Genome>(
    instance: &Instance,
    one: &G,
    two: &G,
    mode: MoveMode,
) -> Result<(G, G), GaError> {
    let n = one.genes().len();
    if two.genes().len() != n {
        return Err(GaError::LengthMismatch(n, two.genes().len()));
    }
    let half = n / 2;
    let mut first = one.clone();
    for index in 0..half {
        first.apply_move(instance, index, two.genes()[index], mode)?;
    }
    let mut second = one.clone();
    for index in half..n {
        second.apply_move(instance, index, two.genes()[index], mode)?;
    }
    Ok((first, second))
}

/// Returns `count` indices, each the fittest of `k` uniform draws with
/// replacement. Ties go to the earlier draw.
pub fn tournament_select(
    fitness: &[u64],
    k: usize,
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<usize>, GaError> {
    if fitness.is_empty() {
        return Err(GaError::EmptyPopulation);
    }
    if k == 0 {
        return Err(GaError::Config("tournament size must be positive".into()));
    }
    Ok((0..count)
        .map(|_| {
            let mut best = rng.gen_range(0..fitness.len());
            for _ in 1..k {
                let c = rng.gen_range(0..fitness.len());
                if fitness[c] < fitness[best] {
                    best = c;
                }
            }
            best
        })
        .collect())
}

/// Produces `lambda` unevaluated offspring, each by exactly one operator.
pub fn var_or<G: Genome>(
    instance: &Instance,
    population: &[Scored<G>],
    lambda: usize,
    crossover_probability: f64,
    mutation_probability: f64,
    mode: MoveMode,
    rng: &mut impl Rng,
) -> Result<Vec<(G, Operator)>, GaError> {
    if population.is_empty() {
        return Err(GaError::EmptyPopulation);
    }
    let mut offspring = Vec::with_capacity(lambda);
    for _ in 0..lambda {
        let r: f64 = rng.gen();
        if r < crossover_probability {
            let (i, j) = if population.len() >= 2 {
                let picked = rand::seq::index::sample(rng, population.len(), 2);
                (picked.index(0), picked.index(1))
            } else {
                (0, 0)
            };
            let (a, b) = single_point_crossover(
                instance,
                &population[i].genome,
                &population[j].genome,
                mode,
            )?;
            let child = if rng.gen_bool(0.5) { a } else { b };
            offspring.push((child, Operator::Crossover));
        } else if r < crossover_probability + mutation_probability {
            let mut child = population[rng.gen_range(0..population.len())]
                .genome
                .clone();
            mutate(instance, &mut child, mode, rng)?;
            offspring.push((child, Operator::Mutation));
        } else {
            let child = population[rng.gen_range(0..population.len())]
                .genome
                .clone();
            offspring.push((child, Operator::Reproduction));
        }
    }
    Ok(offspring)
}

/// Stage fitness and label of one genome.
pub fn score<G: Genome>(instance: &Instance, genome: &G) -> (u64, Label) {
    let timetable = genome.decode(instance);
    let report = match G::STAGE {
        Stage::Hard => hard_violations(instance, &timetable),
        Stage::Soft => evaluate(instance, &timetable),
    }
    .expect("decoded timetable matches instance");
    (report.fitness(G::STAGE), report.label())
}

fn score_all<G: Genome>(
    instance: &Instance,
    genomes: Vec<G>,
    pool: Option<&rayon::ThreadPool>,
) -> Vec<Scored<G>> {
    let one = |genome: G| {
        let (fitness, label) = score(instance, &genome);
        Scored {
            genome,
            fitness,
            label,
        }
    };
    match pool {
        Some(pool) => pool.install(|| genomes.into_par_iter().map(one).collect()),
        None => genomes.into_iter().map(one).collect(),
    }
}

/// Result of one evolution stage.
#[derive(Debug, Clone)]
pub struct StageOutcome<G> {
    pub best: Scored<G>,
    pub trace: EvolutionTrace,
    pub evaluations: u64,
    pub stop: StopReason,
}

/// Mutable state threaded through both stages of a run.
pub struct Evolver<'a, S: ?Sized> {
    instance: &'a Instance,
    config: &'a GaConfig,
    sink: &'a mut S,
    rng: ChaCha8Rng,
    pool: Option<rayon::ThreadPool>,
    evaluations: u64,
}

impl<'a, S: EvaluationSink + ?Sized> Evolver<'a, S> {
    pub fn new(
        instance: &'a Instance,
        config: &'a GaConfig,
        sink: &'a mut S,
    ) -> Result<Self, GaError> {
        config.validate()?;
        let pool = if config.threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(config.threads)
                    .build()
                    .map_err(|e| GaError::ThreadPool(e.to_string()))?,
            )
        } else {
            None
        };
        Ok(Self {
            instance,
            config,
            sink,
            rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
            pool,
            evaluations: 0,
        })
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn budget_left(&self) -> bool {
        self.evaluations < self.config.max_evaluations
    }

    fn score_and_record<G: Genome>(&mut self, genomes: Vec<G>) -> Result<Vec<Scored<G>>, GaError> {
        let scored = score_all(self.instance, genomes, self.pool.as_ref());
        for s in &scored {
            self.sink
                .record(G::STAGE, s.genome.genes(), s.fitness, s.label)?;
        }
        self.evaluations += scored.len() as u64;
        Ok(scored)
    }

    /// Evolves `initial_population` until feasibility (hard stage only),
    /// stagnation, or the evaluation budget stops it.
    pub fn evolve_stage<G: Genome>(
        &mut self,
        initial_population: Vec<G>,
    ) -> Result<StageOutcome<G>, GaError> {
        if initial_population.is_empty() {
            return Err(GaError::EmptyPopulation);
        }
        let config = self.config;
        let stage = G::STAGE;
        let start_evaluations = self.evaluations;
        let mut population = self.score_and_record(initial_population)?;
        let mut best = fittest(&population).clone();
        let mut trace = EvolutionTrace::default();
        let mut generation = 0;
        trace.rows.push(TraceRow {
            generation,
            stage,
            evaluations: self.evaluations,
            best_fitness: best.fitness,
        });

        let mut stagnant = 0;
        let mut mode = MoveMode::Simple;
        let stop = loop {
            if stage == Stage::Hard && best.fitness == 0 {
                break StopReason::Feasible;
            }
            // the hard stage's target is feasibility, checked above
            let target_met =
                stage == Stage::Soft && config.target_fitness.is_none_or(|t| best.fitness <= t);
            if stagnant >= config.stop_non_improving && target_met {
                break StopReason::Stagnation;
            }
            if !self.budget_left() {
                break StopReason::Budget;
            }
            generation += 1;

            let children: Vec<G> = var_or(
                self.instance,
                &population,
                config.offspring_count,
                config.crossover_probability,
                config.mutation_probability,
                mode,
                &mut self.rng,
            )?
            .into_iter()
            .map(|(g, _)| g)
            .collect();
            let children = self.score_and_record(children)?;

            let improved = match children.iter().min_by_key(|c| c.fitness) {
                Some(c) if c.fitness < best.fitness => {
                    best = c.clone();
                    true
                }
                _ => false,
            };
            stagnant = if improved { 0 } else { stagnant + 1 };

            population.extend(children);
            let fitness: Vec<u64> = population.iter().map(|s| s.fitness).collect();
            let chosen = tournament_select(
                &fitness,
                config.tournament_size,
                config.population_size,
                &mut self.rng,
            )?;
            let mut next: Vec<Scored<G>> =
                chosen.into_iter().map(|i| population[i].clone()).collect();
            if !next.iter().any(|s| s.fitness <= best.fitness) {
                let worst = next
                    .iter()
                    .enumerate()
                    .max_by_key(|(_, s)| s.fitness)
                    .map(|(i, _)| i)
                    .unwrap_or_default();
                next[worst] = best.clone();
            }
            population = next;

            if stage == Stage::Soft && stagnant > 0 && stagnant % config.non_improving_switch == 0 {
                mode = mode.toggled();
            }
            trace.rows.push(TraceRow {
                generation,
                stage,
                evaluations: self.evaluations,
                best_fitness: best.fitness,
            });
        };

        Ok(StageOutcome {
            best,
            trace,
            evaluations: self.evaluations - start_evaluations,
            stop,
        })
    }
}

fn fittest<G>(population: &[Scored<G>]) -> &Scored<G> {
    population
        .iter()
        .min_by_key(|s| s.fitness)
        .expect("population is not empty")
}

/// Outcome of a full two-stage run.
#[derive(Debug, Clone)]
pub struct Solution {
    pub timetable: Timetable,
    /// Soft-stage fitness of `timetable`.
    pub fitness: u64,
    pub report: ViolationReport,
    pub label: Label,
    pub trace: EvolutionTrace,
    pub evaluations: u64,
    pub hard_stop: Option<StopReason>,
    pub soft_stop: Option<StopReason>,
}

/// Runs both stages. Every evaluation is forwarded to `sink`.
///
/// When stage one ends without a feasible timetable the best one is returned
/// as is, with unassigned lectures placed in the lowest free room-periods.
pub fn solve<S: EvaluationSink + ?Sized>(
    instance: &Instance,
    config: &GaConfig,
    sink: &mut S,
) -> Result<Solution, GaError> {
    let n = instance.num_events();
    let slots = instance.num_room_period_pairs();
    if n > slots {
        return Err(EncodingError::NotEnoughSlots { events: n, slots }.into());
    }
    let mut evolver = Evolver::new(instance, config, sink)?;

    if config.max_evaluations == 0 {
        let timetable = Timetable::unassigned(n);
        let report = evaluate(instance, &timetable).expect("timetable matches instance");
        return Ok(Solution {
            fitness: report.fitness(Stage::Soft),
            label: report.label(),
            timetable,
            report,
            trace: EvolutionTrace::default(),
            evaluations: 0,
            hard_stop: None,
            soft_stop: None,
        });
    }

    let initial: Vec<HardIndividual> = (0..config.population_size)
        .map(|_| {
            let mut genes: Vec<usize> = (0..n).collect();
            genes.shuffle(evolver.rng());
            HardIndividual::new(genes).expect("shuffled identity is a permutation")
        })
        .collect();
    let hard = evolver.evolve_stage(initial)?;
    let mut trace = hard.trace;
    let hard_timetable = hard.best.genome.decode(instance);
    let seed = SoftIndividual::completing(instance, &hard_timetable)?;

    let finish = |genome: &SoftIndividual, trace: EvolutionTrace, evaluations, soft_stop| {
        let timetable = genome.decode(instance);
        let report = evaluate(instance, &timetable).expect("timetable matches instance");
        Solution {
            fitness: report.fitness(Stage::Soft),
            label: report.label(),
            timetable,
            report,
            trace,
            evaluations,
            hard_stop: Some(hard.stop),
            soft_stop,
        }
    };

    if hard.best.fitness > 0 || !evolver.budget_left() {
        return Ok(finish(&seed, trace, evolver.evaluations(), None));
    }

    let mut initial = Vec::with_capacity(config.population_size);
    initial.push(seed.clone());
    for _ in 1..config.population_size {
        let mut g = seed.clone();
        mutate(instance, &mut g, MoveMode::Simple, evolver.rng())?;
        initial.push(g);
    }
    let soft = evolver.evolve_stage(initial)?;
    trace.extend(soft.trace);
    Ok(finish(
        &soft.best.genome,
        trace,
        evolver.evaluations(),
        Some(soft.stop),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::chain_move;

    const TOY: &str = include_str!("../tests/fixtures/toy.ctt");

    fn toy() -> Instance {
        Instance::parse(TOY).unwrap()
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[derive(Default)]
    struct Recorder {
        rows: Vec<(Stage, Vec<usize>, u64, Label)>,
    }

    impl EvaluationSink for Recorder {
        fn record(
            &mut self,
            stage: Stage,
            genes: &[usize],
            fitness: u64,
            label: Label,
        ) -> Result<(), DatasetError> {
            self.rows.push((stage, genes.to_vec(), fitness, label));
            Ok(())
        }
    }

    #[test]
    fn hard_mutation_keeps_permutation() {
        let inst = toy();
        for seed in 0..50 {
            let mut g = HardIndividual::new(vec![2, 1, 3, 0]).unwrap();
            mutate(&inst, &mut g, MoveMode::Chain, &mut rng(seed)).unwrap();
            assert!(HardIndividual::new(g.genes().to_vec()).is_ok());
            assert_ne!(g.genes(), &[2, 1, 3, 0]);
        }
    }

    #[test]
    fn soft_simple_mutation_changes_one_or_two_genes() {
        let inst = toy();
        for seed in 0..50 {
            let mut g = SoftIndividual::new(&inst, vec![7, 0, 3, 1]).unwrap();
            mutate(&inst, &mut g, MoveMode::Simple, &mut rng(seed)).unwrap();
            let hamming = g
                .genes()
                .iter()
                .zip([7, 0, 3, 1])
                .filter(|(a, b)| **a != *b)
                .count();
            assert!((1..=2).contains(&hamming), "seed {seed}: {:?}", g.genes());
        }
    }

    #[test]
    fn chain_mutation_matches_direct_chain_move() {
        let inst = toy();
        for seed in 0..50 {
            let mut via_mutate = SoftIndividual::new(&inst, vec![7, 0, 3, 1]).unwrap();
            mutate(&inst, &mut via_mutate, MoveMode::Chain, &mut rng(seed)).unwrap();

            // replay the same draws
            let mut r = rng(seed);
            let position = r.gen_range(0..4);
            let current = [7, 0, 3, 1][position];
            let mut allele = r.gen_range(0..7);
            if allele >= current {
                allele += 1;
            }
            let mut direct = SoftIndividual::new(&inst, vec![7, 0, 3, 1]).unwrap();
            chain_move(&inst, &mut direct, position, allele).unwrap();
            assert_eq!(via_mutate, direct);
        }
    }

    #[test]
    fn crossover_of_disjoint_parents() {
        // 6 events and 12 room-period pairs so that alleles 1..=12 fit.
        let text = "Name: Six\nCourses: 6\nRooms: 1\nDays: 1\nPeriods_per_day: 13\nCurricula: 0\nConstraints: 0\n\n\
                    COURSES:\na ta 1 1 1\nb tb 1 1 1\nc tc 1 1 1\nd td 1 1 1\ne te 1 1 1\nf tf 1 1 1\n\n\
                    ROOMS:\nr 10\n\nCURRICULA:\n\nUNAVAILABILITY_CONSTRAINTS:\n\nEND.\n";
        let inst = Instance::parse(text).unwrap();
        let one = SoftIndividual::new(&inst, vec![1, 2, 3, 4, 5, 6]).unwrap();
        let two = SoftIndividual::new(&inst, vec![7, 8, 9, 10, 11, 12]).unwrap();
        let (a, b) = single_point_crossover(&inst, &one, &two, MoveMode::Simple).unwrap();
        assert_eq!(a.genes(), &[7, 8, 9, 4, 5, 6]);
        assert_eq!(b.genes(), &[1, 2, 3, 10, 11, 12]);
    }

    #[test]
    fn crossover_of_identical_parents() {
        let inst = toy();
        let p = SoftIndividual::new(&inst, vec![7, 0, 3, 1]).unwrap();
        let (a, b) = single_point_crossover(&inst, &p, &p, MoveMode::Chain).unwrap();
        assert_eq!((&a, &b), (&p, &p));
    }

    #[test]
    fn crossover_of_permutations() {
        let inst = toy();
        let one = HardIndividual::new(vec![0, 1, 2, 3]).unwrap();
        let two = HardIndividual::new(vec![1, 0, 3, 2]).unwrap();
        let (a, b) = single_point_crossover(&inst, &one, &two, MoveMode::Simple).unwrap();
        assert_eq!(a.genes(), &[1, 0, 2, 3]);
        assert_eq!(b.genes(), &[0, 1, 3, 2]);
    }

    #[test]
    fn tournament_limits() {
        let fitness = [9, 4, 7, 1, 8];
        let picks = tournament_select(&fitness, 200, 20, &mut rng(1)).unwrap();
        assert!(picks.iter().all(|&i| i == 3));

        let picks = tournament_select(&fitness, 1, 5000, &mut rng(2)).unwrap();
        for i in 0..5 {
            let share = picks.iter().filter(|&&p| p == i).count() as f64 / 5000.0;
            assert!((share - 0.2).abs() < 0.03, "index {i}: {share}");
        }
        assert!(matches!(
            tournament_select(&[], 2, 1, &mut rng(0)),
            Err(GaError::EmptyPopulation)
        ));
    }

    #[test]
    fn tournament_pressure_two_of_two() {
        // Of the four equally likely ordered draws only (worse, worse) loses.
        let picks = tournament_select(&[3, 5], 2, 20_000, &mut rng(3)).unwrap();
        let share = picks.iter().filter(|&&p| p == 0).count() as f64 / 20_000.0;
        assert!((share - 0.75).abs() < 0.015, "{share}");
    }

    fn scored_toy_population(n: usize) -> Vec<Scored<SoftIndividual>> {
        let inst = toy();
        let mut r = rng(9);
        (0..n)
            .map(|_| {
                let mut genes: Vec<usize> = (0..8).collect();
                genes.shuffle(&mut r);
                genes.truncate(4);
                let g = SoftIndividual::new(&inst, genes).unwrap();
                let (fitness, label) = score(&inst, &g);
                Scored {
                    genome: g,
                    fitness,
                    label,
                }
            })
            .collect()
    }

    #[test]
    fn var_or_only_clones_without_operators() {
        let inst = toy();
        let pop = scored_toy_population(5);
        let kids = var_or(&inst, &pop, 30, 0.0, 0.0, MoveMode::Simple, &mut rng(4)).unwrap();
        assert_eq!(kids.len(), 30);
        for (g, op) in kids {
            assert_eq!(op, Operator::Reproduction);
            assert!(pop.iter().any(|p| p.genome == g));
        }
        let kids = var_or(&inst, &pop, 30, 1.0, 0.0, MoveMode::Simple, &mut rng(4)).unwrap();
        assert!(kids.iter().all(|(_, op)| *op == Operator::Crossover));
    }

    #[test]
    fn var_or_operator_frequencies() {
        let inst = toy();
        let pop = scored_toy_population(10);
        let kids = var_or(&inst, &pop, 100, 0.6, 0.3, MoveMode::Simple, &mut rng(5)).unwrap();
        let count = |op| kids.iter().filter(|(_, o)| *o == op).count() as f64;
        // 99% normal-approximation intervals of Binomial(100, p)
        for (op, p) in [
            (Operator::Crossover, 0.6_f64),
            (Operator::Mutation, 0.3),
            (Operator::Reproduction, 0.1),
        ] {
            let half_width = 2.576 * (100.0 * p * (1.0 - p)).sqrt();
            assert!(
                (count(op) - 100.0 * p).abs() <= half_width,
                "{op:?}: {}",
                count(op)
            );
        }
    }

    #[test]
    fn sink_sees_every_evaluation() {
        let inst = toy();
        let config = GaConfig {
            population_size: 6,
            offspring_count: 5,
            stop_non_improving: 3,
            rng_seed: 11,
            ..GaConfig::default()
        };
        let mut sink = Recorder::default();
        let solution = solve(&inst, &config, &mut sink).unwrap();
        let hard_gens = solution.trace.stage_rows(Stage::Hard).count() - 1;
        let soft_gens = solution.trace.stage_rows(Stage::Soft).count() - 1;
        let expected = (6 + 5 * hard_gens) + (6 + 5 * soft_gens);
        assert_eq!(sink.rows.len(), expected);
        assert_eq!(solution.evaluations, expected as u64);
        for (stage, genes, fitness, label) in &sink.rows {
            if *stage == Stage::Soft {
                assert_eq!(genes.len(), 4);
                if *fitness < 1000 {
                    assert_eq!(*label, Label::Feasible);
                }
            }
        }
    }

    #[test]
    fn stagnation_stop_at_target() {
        let inst = toy();
        let config = GaConfig {
            population_size: 4,
            offspring_count: 4,
            stop_non_improving: 1,
            target_fitness: Some(u64::MAX),
            rng_seed: 3,
            ..GaConfig::default()
        };
        let mut sink = NullSink;
        let mut evolver = Evolver::new(&inst, &config, &mut sink).unwrap();
        let genome = SoftIndividual::new(&inst, vec![0, 2, 4, 6]).unwrap();
        let outcome = evolver.evolve_stage(vec![genome; 4]).unwrap();
        // first generation either improves (and resets) or stagnates once
        assert_eq!(outcome.stop, StopReason::Stagnation);
        let last = outcome.trace.rows.last().unwrap();
        assert!(outcome.trace.rows.len() >= 2);
        assert_eq!(last.best_fitness, outcome.best.fitness);
    }

    #[test]
    fn budget_of_one_population() {
        let inst = toy();
        let config = GaConfig {
            population_size: 10,
            max_evaluations: 10,
            rng_seed: 5,
            ..GaConfig::default()
        };
        let mut sink = Recorder::default();
        let solution = solve(&inst, &config, &mut sink).unwrap();
        assert_eq!(solution.evaluations, 10);
        assert_eq!(sink.rows.len(), 10);
        assert_eq!(solution.label, Label::Feasible);
        assert!(solution.soft_stop.is_none());
    }

    #[test]
    fn zero_budget_is_infeasible() {
        let inst = toy();
        let config = GaConfig {
            max_evaluations: 0,
            ..GaConfig::default()
        };
        let solution = solve(&inst, &config, &mut NullSink).unwrap();
        assert_eq!(solution.label, Label::NonFeasible);
        assert_eq!(solution.evaluations, 0);
    }

    #[test]
    fn serial_runs_are_reproducible() {
        let inst = toy();
        let config = GaConfig {
            population_size: 8,
            offspring_count: 8,
            stop_non_improving: 5,
            rng_seed: 99,
            ..GaConfig::default()
        };
        let (mut a, mut b) = (Recorder::default(), Recorder::default());
        let sa = solve(&inst, &config, &mut a).unwrap();
        let sb = solve(&inst, &config, &mut b).unwrap();
        assert_eq!(sa.trace, sb.trace);
        assert_eq!(sa.timetable, sb.timetable);
        assert_eq!(a.rows, b.rows);

        let threaded = GaConfig {
            threads: 3,
            ..config
        };
        let mut c = Recorder::default();
        let sc = solve(&inst, &threaded, &mut c).unwrap();
        assert_eq!(sa.trace, sc.trace);
        assert_eq!(a.rows, c.rows);
    }

    #[test]
    fn config_validation() {
        let bad = GaConfig {
            crossover_probability: 0.8,
            mutation_probability: 0.3,
            ..GaConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(GaConfig::default().validate().is_ok());
    }
}
