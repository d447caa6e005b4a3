//! Real-coded genetic algorithm over the sum of absolute residuals.
//!
//! Each chromosome is a candidate solution vector. Fitness is
//! `sum_i |r_i(x)|` (lower is better), which vanishes exactly at roots and
//! bounds the Euclidean residual norm from above, so a fitness below a
//! tolerance certifies a residual norm below it too. Points that leave the
//! domain of the system are kept in the population with the fixed penalty
//! [`DOMAIN_PENALTY`] so any in-domain candidate outranks them.
//!
//! The loop is generational: the `elite_count` best chromosomes are copied
//! unchanged, and the remaining slots are filled by tournament selection,
//! one-point crossover, and per-gene uniform mutation clamped to the
//! initialisation bounds. All randomness flows through a single
//! seed-determined generator, so a run is a pure function of the system and
//! the configuration.
//!
//! Because the population explores globally, one run can surface several
//! roots at once; [`distinct_solutions`] extracts near-root candidates that
//! are mutually farther apart than `dedup_radius`.

use crate::expr::EquationSystem;
use crate::report::{Method, SolveReport};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::time::Instant;

/// Fitness assigned to chromosomes whose evaluation leaves the domain.
pub const DOMAIN_PENALTY: f64 = 1e12;

/// Improvements smaller than this do not reset the stall counter.
const STALL_IMPROVEMENT_EPS: f64 = 1e-12;

/// A candidate solution vector, one gene per system variable.
#[derive(Clone, Debug, PartialEq)]
pub struct Chromosome {
    pub genes: Vec<f64>,
}

/// Genetic algorithm parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct GaConfig {
    pub population_size: usize,
    /// Probability that a selected pair exchanges gene tails.
    pub crossover_rate: f64,
    /// Per-gene probability of an additive perturbation.
    pub mutation_rate: f64,
    pub max_generations: usize,
    /// Contestants per tournament, sampled with replacement.
    pub tournament_size: usize,
    /// Best chromosomes copied unchanged into the next generation.
    pub elite_count: usize,
    /// Lower initialisation bound, applied to every gene.
    pub init_low: f64,
    /// Upper initialisation bound, applied to every gene.
    pub init_high: f64,
    /// Mutation perturbations are uniform in `(-mutation_delta, mutation_delta)`.
    pub mutation_delta: f64,
    /// Terminate once the best fitness falls below this.
    pub fitness_threshold: f64,
    /// Terminate after this many consecutive generations without meaningful
    /// improvement.
    pub stall_generations: usize,
    pub seed: u64,
    /// Candidates closer than this (Euclidean) are treated as one solution.
    pub dedup_radius: f64,
}

impl Default for GaConfig {
    fn default() -> GaConfig {
        GaConfig {
            population_size: 100,
            crossover_rate: 0.8,
            mutation_rate: 0.01,
            max_generations: 100,
            tournament_size: 3,
            elite_count: 2,
            init_low: -10.0,
            init_high: 10.0,
            mutation_delta: 0.06,
            fitness_threshold: 1e-4,
            stall_generations: 30,
            seed: 42,
            dedup_radius: 0.5,
        }
    }
}

/// A [`GaConfig`] field is out of range.
#[derive(Clone, Debug, PartialEq)]
pub struct InvalidConfig(pub String);

impl fmt::Display for InvalidConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration: {}", self.0)
    }
}

impl std::error::Error for InvalidConfig {}

impl GaConfig {
    pub fn validate(&self) -> Result<(), InvalidConfig> {
        if self.population_size == 0 {
            return Err(InvalidConfig(
                "ga.population_size must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(InvalidConfig("ga.crossover_rate must be in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(InvalidConfig("ga.mutation_rate must be in [0, 1]".into()));
        }
        if self.max_generations == 0 {
            return Err(InvalidConfig(
                "ga.max_generations must be at least 1".into(),
            ));
        }
        if self.tournament_size == 0 {
            return Err(InvalidConfig(
                "ga.tournament_size must be at least 1".into(),
            ));
        }
        if self.elite_count >= self.population_size {
            return Err(InvalidConfig(
                "ga.elite_count must be smaller than ga.population_size".into(),
            ));
        }
        if self.init_low.is_nan() || self.init_high.is_nan() || self.init_low > self.init_high {
            return Err(InvalidConfig(
                "ga.init_low must not exceed ga.init_high".into(),
            ));
        }
        if self.mutation_delta.is_nan() || self.mutation_delta <= 0.0 {
            return Err(InvalidConfig("ga.mutation_delta must be positive".into()));
        }
        if self.fitness_threshold.is_nan() || self.fitness_threshold <= 0.0 {
            return Err(InvalidConfig(
                "ga.fitness_threshold must be positive".into(),
            ));
        }
        if self.stall_generations == 0 {
            return Err(InvalidConfig(
                "ga.stall_generations must be at least 1".into(),
            ));
        }
        if self.dedup_radius.is_nan() || self.dedup_radius <= 0.0 {
            return Err(InvalidConfig("ga.dedup_radius must be positive".into()));
        }
        Ok(())
    }
}

/// Extends [`SolveReport`] with the population-level outputs only the
/// genetic algorithm produces.
///
/// Invariants: `distinct_solutions` is sorted by ascending fitness and its
/// entries are pairwise at least `dedup_radius` apart.
#[derive(Clone, Debug, PartialEq)]
pub struct GaResult {
    pub report: SolveReport,
    /// Near-root candidates `(point, fitness)` after deduplication.
    pub distinct_solutions: Vec<(Vec<f64>, f64)>,
    pub generations_run: usize,
    pub seed_used: u64,
    /// Squared Euclidean residual norm of the generation best, per
    /// generation; the companion of `report.trace` in least-squares terms.
    pub squared_residual_trace: Vec<(usize, f64)>,
}

// ============================================================================
// Operators
// ============================================================================

/// Sum of absolute residuals at the chromosome, or [`DOMAIN_PENALTY`] if the
/// evaluation leaves the domain.
pub fn fitness(system: &EquationSystem, chromosome: &Chromosome) -> f64 {
    match system.residual_vector(&chromosome.genes) {
        Ok(r) => r.iter().map(|v| v.abs()).sum(),
        Err(_) => DOMAIN_PENALTY,
    }
}

/// Uniform random population within the initialisation bounds.
pub fn init_population(
    config: &GaConfig,
    variable_count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Chromosome>, InvalidConfig> {
    config.validate()?;
    if variable_count == 0 {
        return Err(InvalidConfig(
            "system must have at least one variable".into(),
        ));
    }
    Ok((0..config.population_size)
        .map(|_| Chromosome {
            genes: (0..variable_count)
                .map(|_| rng.gen_range(config.init_low..=config.init_high))
                .collect(),
        })
        .collect())
}

/// Index variant of [`tournament_select`].
fn tournament_select_index(fitnesses: &[f64], config: &GaConfig, rng: &mut impl Rng) -> usize {
    let mut best = rng.gen_range(0..fitnesses.len());
    for _ in 1..config.tournament_size {
        let contender = rng.gen_range(0..fitnesses.len());
        // Ties go to the lowest population index.
        if fitnesses[contender] < fitnesses[best]
            || (fitnesses[contender] == fitnesses[best] && contender < best)
        {
            best = contender;
        }
    }
    best
}

/// Draws `tournament_size` contestants with replacement and returns the
/// fittest, breaking ties by the lowest population index.
pub fn tournament_select(
    population: &[Chromosome],
    fitnesses: &[f64],
    config: &GaConfig,
    rng: &mut impl Rng,
) -> Chromosome {
    assert_eq!(population.len(), fitnesses.len());
    assert!(!population.is_empty(), "population must not be empty");
    population[tournament_select_index(fitnesses, config, rng)].clone()
}

/// One-point crossover.
///
/// With probability `crossover_rate` picks a cut uniformly from the interior
/// positions `1..n-1` and exchanges the tails; otherwise (and always for
/// single-gene chromosomes, which have no interior cut) returns unchanged
/// copies of the parents.
pub fn crossover_one_point(
    parent1: &Chromosome,
    parent2: &Chromosome,
    config: &GaConfig,
    rng: &mut impl Rng,
) -> (Chromosome, Chromosome) {
    let n = parent1.genes.len();
    assert_eq!(n, parent2.genes.len(), "parents must have equal length");
    if n > 1 && rng.gen::<f64>() < config.crossover_rate {
        let cut = rng.gen_range(1..n);
        let mut child1 = parent1.genes[..cut].to_vec();
        child1.extend_from_slice(&parent2.genes[cut..]);
        let mut child2 = parent2.genes[..cut].to_vec();
        child2.extend_from_slice(&parent1.genes[cut..]);
        (Chromosome { genes: child1 }, Chromosome { genes: child2 })
    } else {
        (parent1.clone(), parent2.clone())
    }
}

/// Per-gene additive mutation.
///
/// Each gene is perturbed with probability `mutation_rate` by a uniform draw
/// from `(-mutation_delta, mutation_delta)` and clamped back into the
/// initialisation bounds.
pub fn mutate(chromosome: &Chromosome, config: &GaConfig, rng: &mut impl Rng) -> Chromosome {
    let genes = chromosome
        .genes
        .iter()
        .map(|&g| {
            if rng.gen::<f64>() < config.mutation_rate {
                let perturbed = g + rng.gen_range(-config.mutation_delta..config.mutation_delta);
                perturbed.clamp(config.init_low, config.init_high)
            } else {
                g
            }
        })
        .collect();
    Chromosome { genes }
}

/// Near-root candidates from a population, deduplicated.
///
/// Keeps chromosomes with fitness below `100 * fitness_threshold`, walks
/// them in ascending fitness order, and drops any candidate within
/// `dedup_radius` (Euclidean) of an already kept one. The result is sorted
/// by ascending fitness and pairwise at least `dedup_radius` apart.
pub fn distinct_solutions(
    population: &[Chromosome],
    fitnesses: &[f64],
    config: &GaConfig,
) -> Vec<(Vec<f64>, f64)> {
    assert_eq!(population.len(), fitnesses.len());
    let cutoff = 100.0 * config.fitness_threshold;
    let mut candidates: Vec<usize> = (0..population.len())
        .filter(|&i| fitnesses[i] < cutoff)
        .collect();
    candidates.sort_by(|&a, &b| {
        fitnesses[a]
            .partial_cmp(&fitnesses[b])
            .expect("fitness below the cutoff is finite")
            .then(a.cmp(&b))
    });
    let mut kept: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in candidates {
        let genes = &population[i].genes;
        let is_new = kept.iter().all(|(point, _)| {
            let dist2: f64 = point
                .iter()
                .zip(genes)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dist2.sqrt() >= config.dedup_radius
        });
        if is_new {
            kept.push((genes.clone(), fitnesses[i]));
        }
    }
    kept
}

// ============================================================================
// Solve loop
// ============================================================================

/// Runs the generational loop until the fitness threshold, the generation
/// budget, or the stall window ends it.
///
/// The report's `trace` is the best fitness per generation (non-increasing,
/// thanks to elitism), `solutions` holds the single best chromosome, and
/// `converged` is true only when the fitness threshold was reached. The
/// same system and configuration always produce the identical result.
pub fn ga_solve(system: &EquationSystem, config: &GaConfig) -> Result<GaResult, InvalidConfig> {
    config.validate()?;
    let start = Instant::now();
    let n = system.variable_count();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut population = init_population(config, n, &mut rng)?;
    let mut fitnesses: Vec<f64> = population.iter().map(|c| fitness(system, c)).collect();

    let best_of = |fitnesses: &[f64]| -> usize {
        let mut best = 0;
        for (i, &f) in fitnesses.iter().enumerate() {
            if f < fitnesses[best] {
                best = i;
            }
        }
        best
    };
    let squared_norm = |system: &EquationSystem, genes: &[f64]| -> f64 {
        system
            .residual_norm(genes)
            .map(|v| v * v)
            .unwrap_or(f64::INFINITY)
    };

    let mut best_idx = best_of(&fitnesses);
    let mut best_fitness = fitnesses[best_idx];
    let mut trace = vec![(0, best_fitness)];
    let mut squared_residual_trace = vec![(0, squared_norm(system, &population[best_idx].genes))];
    let mut generations_run = 0usize;
    let mut stall = 0usize;
    let (converged, note) = loop {
        if best_fitness < config.fitness_threshold {
            break (true, None);
        }
        if generations_run >= config.max_generations {
            break (
                false,
                Some(format!(
                    "no convergence within {} generations",
                    config.max_generations
                )),
            );
        }
        if stall >= config.stall_generations {
            break (
                false,
                Some(format!(
                    "stalled for {} generations",
                    config.stall_generations
                )),
            );
        }

        // Elites: best `elite_count` by fitness, ties by index.
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| {
            fitnesses[a]
                .partial_cmp(&fitnesses[b])
                .expect("penalty fitness keeps values comparable")
                .then(a.cmp(&b))
        });
        let mut next: Vec<Chromosome> = order
            .iter()
            .take(config.elite_count)
            .map(|&i| population[i].clone())
            .collect();
        while next.len() < config.population_size {
            let p1 = &population[tournament_select_index(&fitnesses, config, &mut rng)];
            let p2 = &population[tournament_select_index(&fitnesses, config, &mut rng)];
            let (c1, c2) = crossover_one_point(p1, p2, config, &mut rng);
            let c1 = mutate(&c1, config, &mut rng);
            let c2 = mutate(&c2, config, &mut rng);
            next.push(c1);
            if next.len() < config.population_size {
                next.push(c2);
            }
        }
        population = next;
        fitnesses = population.iter().map(|c| fitness(system, c)).collect();
        generations_run += 1;

        best_idx = best_of(&fitnesses);
        let generation_best = fitnesses[best_idx];
        // Elitism makes the best fitness non-increasing, so the improvement
        // is never negative.
        let improvement = best_fitness - generation_best;
        if improvement < STALL_IMPROVEMENT_EPS {
            stall += 1;
        } else {
            stall = 0;
        }
        best_fitness = generation_best;
        trace.push((generations_run, best_fitness));
        squared_residual_trace.push((
            generations_run,
            squared_norm(system, &population[best_idx].genes),
        ));
    };

    let best = population[best_idx].clone();
    let residual_norm = system.residual_norm(&best.genes).unwrap_or(f64::INFINITY);
    let distinct = distinct_solutions(&population, &fitnesses, config);
    Ok(GaResult {
        report: SolveReport {
            method: Method::Ga,
            solutions: vec![best.genes],
            residual_norms: vec![residual_norm],
            iterations: generations_run,
            converged,
            trace,
            elapsed: start.elapsed(),
            note,
        },
        distinct_solutions: distinct,
        generations_run,
        seed_used: config.seed,
        squared_residual_trace,
    })
}

// ============================================================================
// Tests
// ============================================================================
