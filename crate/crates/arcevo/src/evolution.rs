//! The generation loop: island-parallel sampling and evaluation, fixed
//! per-island elite pools, elite-mean aggregation, and best-ever tracking.
//!
//! The sampling variance is derived once from the starting genotype and
//! never changes, so exploration strength stays constant for the whole run.
//! Islands evolve independently within a generation and exchange
//! information only at the aggregation barrier, where the next mean is the
//! average of every pooled elite.
//!
//! Offspring are keyed by (seed, generation, island, index) streams, so any
//! individual can be regenerated from its key. Evaluation keeps only the
//! score; a genotype is re-materialized just when it enters an elite pool
//! or becomes the best ever. That bounds live memory to the pools plus one
//! offspring per evaluator regardless of population size, and makes the
//! whole run independent of evaluation scheduling.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::genotype::{average, derive_variance, Genotype, GenotypeError, SamplingDistribution};
use crate::reasoner::Reasoner;
use crate::rng::NormalStream;
use crate::score::meta_score_detailed;
use crate::task::ArcTask;

/// How elite pools persist across generations.
///
/// `Persistent` keeps pool entries until strictly better offspring replace
/// them, so elites can survive many generations. `PerGeneration` empties
/// every pool at the start of each generation, selecting only from the
/// current offspring; it exists for ablation against the persistent rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EliteMode {
    Persistent,
    PerGeneration,
}

impl fmt::Display for EliteMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EliteMode::Persistent => write!(f, "persistent"),
            EliteMode::PerGeneration => write!(f, "per_generation"),
        }
    }
}

impl std::str::FromStr for EliteMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "persistent" => Ok(EliteMode::Persistent),
            "per_generation" => Ok(EliteMode::PerGeneration),
            other => Err(format!("unknown elite mode '{other}' (expected persistent or per_generation)")),
        }
    }
}

/// Numeric settings of one evolution run.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionConfig {
    /// Population size per generation, split evenly across islands.
    pub lambda: usize,
    /// Elite group size across all islands; each island keeps `mu / islands`.
    pub mu: usize,
    pub islands: usize,
    pub generations: u32,
    /// Exploration strength in [0, 1] scaling each layer's mean magnitude
    /// into its sampling variance.
    pub epsilon: f64,
    /// Lower bound on every variance entry; keeps all-zero layers moving.
    pub sigma_floor: f64,
    pub seed: u64,
    pub elite_mode: EliteMode,
    /// Concurrency knob only; results are identical for any value.
    pub evaluators_per_island: usize,
}

impl EvolutionConfig {
    /// Reference full-scale settings: population 1000 spread over 4
    /// islands, elite group 4, budget 12 generations.
    pub fn full_scale(seed: u64) -> EvolutionConfig {
        EvolutionConfig {
            lambda: 1000,
            mu: 4,
            islands: 4,
            generations: 12,
            epsilon: 0.1,
            sigma_floor: 0.01,
            seed,
            elite_mode: EliteMode::Persistent,
            evaluators_per_island: 1,
        }
    }

    pub fn validate(&self) -> Result<(), EvolutionError> {
        let fail = |field: &'static str, message: String| {
            Err(EvolutionError::InvalidConfig { field, message })
        };
        if self.islands == 0 {
            return fail("islands", "must be at least 1".into());
        }
        if self.lambda == 0 {
            return fail("lambda", "must be at least 1".into());
        }
        if self.lambda > u32::MAX as usize {
            return fail("lambda", "population size too large".into());
        }
        if self.lambda % self.islands != 0 {
            return fail(
                "lambda",
                format!("{} not divisible by {} islands", self.lambda, self.islands),
            );
        }
        if self.mu == 0 {
            return fail("mu", "must be at least 1".into());
        }
        if self.mu % self.islands != 0 {
            return fail(
                "mu",
                format!(
                    "{} not divisible by {} islands; elites would be dropped silently",
                    self.mu, self.islands
                ),
            );
        }
        if self.mu < self.islands {
            return fail("mu", "islands would keep no elites".into());
        }
        if self.mu > self.lambda {
            return fail(
                "mu",
                format!("elite group {} exceeds population {}", self.mu, self.lambda),
            );
        }
        if self.generations == 0 {
            return fail("generations", "must be at least 1".into());
        }
        if !self.epsilon.is_finite() || !(0.0..=1.0).contains(&self.epsilon) {
            return fail("epsilon", format!("{} outside [0, 1]", self.epsilon));
        }
        if !self.sigma_floor.is_finite() || self.sigma_floor < 0.0 {
            return fail("sigma_floor", format!("{} must be non-negative", self.sigma_floor));
        }
        if self.evaluators_per_island == 0 {
            return fail("evaluators_per_island", "must be at least 1".into());
        }
        Ok(())
    }

    /// Elite slots per island.
    pub fn pool_capacity(&self) -> usize {
        self.mu / self.islands
    }

    /// Offspring per island per generation.
    pub fn per_island(&self) -> usize {
        self.lambda / self.islands
    }
}

/// One fitness evaluation: the scalar being maximized plus how many
/// reasoner calls failed while computing it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub fitness: f64,
    pub failures: u32,
}

/// Fitness function over genotypes. Implementations declare whether they
/// tolerate concurrent calls; the engine serializes evaluation otherwise.
pub trait Scorer: Sync {
    fn evaluate(&self, genotype: &Genotype) -> Evaluation;

    fn concurrency_safe(&self) -> bool {
        true
    }
}

/// Scorer over a fixed task list: mean task score of the reasoner the
/// genotype parameterizes.
pub struct TaskScorer<R> {
    reasoner: R,
    tasks: Vec<ArcTask>,
}

impl<R: Reasoner> TaskScorer<R> {
    pub fn new(reasoner: R, tasks: Vec<ArcTask>) -> TaskScorer<R> {
        assert!(!tasks.is_empty(), "task scorer needs at least one task");
        TaskScorer { reasoner, tasks }
    }

    pub fn tasks(&self) -> &[ArcTask] {
        &self.tasks
    }
}

impl<R: Reasoner + Sync> Scorer for TaskScorer<R> {
    fn evaluate(&self, genotype: &Genotype) -> Evaluation {
        let eval = meta_score_detailed(&self.reasoner, genotype, &self.tasks);
        Evaluation { fitness: eval.score.value(), failures: eval.failures }
    }

    fn concurrency_safe(&self) -> bool {
        self.reasoner.concurrency_safe()
    }
}

/// One elite: a surviving genotype, its score, and the island-local ordinal
/// of the evaluation that produced it (generation and index folded into one
/// counter, used to break score ties toward the earlier individual).
#[derive(Clone, Debug)]
pub struct ElitePoolEntry {
    pub genotype: Genotype,
    pub score: f64,
    pub ordinal: u64,
}

/// Fixed-capacity elite pool of one island, kept sorted by score descending
/// with earlier ordinals first among ties.
#[derive(Clone, Debug)]
pub struct IslandState {
    island_id: usize,
    capacity: usize,
    entries: Vec<ElitePoolEntry>,
}

impl IslandState {
    pub fn new(island_id: usize, capacity: usize) -> IslandState {
        assert!(capacity >= 1, "elite pool needs at least one slot");
        IslandState { island_id, capacity, entries: Vec::with_capacity(capacity) }
    }

    /// Rebuild an island from persisted entries (checkpoint restore).
    pub fn restore(
        island_id: usize,
        capacity: usize,
        entries: Vec<ElitePoolEntry>,
    ) -> Result<IslandState, EvolutionError> {
        if capacity == 0 || entries.len() > capacity {
            return Err(EvolutionError::StateMismatch(format!(
                "island {island_id}: {} entries exceed capacity {capacity}",
                entries.len()
            )));
        }
        let ordered = entries.windows(2).all(|w| {
            w[0].score > w[1].score || (w[0].score == w[1].score && w[0].ordinal < w[1].ordinal)
        });
        if !ordered {
            return Err(EvolutionError::StateMismatch(format!(
                "island {island_id}: elite entries out of order"
            )));
        }
        Ok(IslandState { island_id, capacity, entries })
    }

    pub fn island_id(&self) -> usize {
        self.island_id
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn entries(&self) -> &[ElitePoolEntry] {
        &self.entries
    }

    pub fn at_capacity(&self) -> bool {
        self.entries.len() == self.capacity
    }

    fn clear(&mut self) {
        self.entries.clear();
    }

    fn insert_position(&self, score: f64, ordinal: u64) -> usize {
        self.entries
            .partition_point(|e| e.score > score || (e.score == score && e.ordinal < ordinal))
    }

    /// Offer one evaluated offspring. The pool fills while under capacity;
    /// once full, an offspring replaces the current minimum only when its
    /// score is strictly greater. The genotype is materialized only when the
    /// entry is actually kept.
    pub fn offer<F: FnOnce() -> Genotype>(
        &mut self,
        score: f64,
        ordinal: u64,
        genotype: F,
    ) -> bool {
        if !score.is_finite() {
            return false;
        }
        if self.entries.len() == self.capacity {
            let current_min = self.entries.last().expect("capacity >= 1").score;
            if !(score > current_min) {
                return false;
            }
            self.entries.pop();
        }
        let position = self.insert_position(score, ordinal);
        self.entries.insert(position, ElitePoolEntry { genotype: genotype(), score, ordinal });
        true
    }

    fn absorb(
        &mut self,
        dist: &SamplingDistribution,
        seed: u64,
        generation: u32,
        per_island: usize,
        evals: &[Evaluation],
    ) {
        let island = self.island_id;
        for (index, eval) in evals.iter().enumerate() {
            let ordinal = u64::from(generation - 1) * per_island as u64 + index as u64;
            self.offer(eval.fitness, ordinal, || {
                sample_individual(dist, seed, generation, island, index)
            });
        }
    }
}

/// Regenerate the offspring `(generation, island, index)` from its stream.
pub fn sample_individual(
    dist: &SamplingDistribution,
    seed: u64,
    generation: u32,
    island: usize,
    index: usize,
) -> Genotype {
    dist.sample(NormalStream::for_individual(seed, generation, island as u32, index as u32))
}

/// Per-island statistics of one generation step.
#[derive(Clone, Debug)]
pub struct IslandStepStats {
    /// Fitness per offspring, in sampling order.
    pub scores: Vec<f64>,
    pub failures: u32,
}

/// Sample and evaluate `count` offspring for one island at `generation`,
/// updating its elite pool in offspring order. `count` must stay constant
/// across a run for the tie-breaking ordinals to stay meaningful.
pub fn island_step(
    state: &mut IslandState,
    dist: &SamplingDistribution,
    count: usize,
    scorer: &dyn Scorer,
    seed: u64,
    generation: u32,
) -> IslandStepStats {
    let evals: Vec<Evaluation> = (0..count)
        .map(|index| evaluate_offspring(dist, scorer, seed, generation, state.island_id, index))
        .collect();
    state.absorb(dist, seed, generation, count, &evals);
    IslandStepStats {
        scores: evals.iter().map(|e| e.fitness).collect(),
        failures: evals.iter().map(|e| e.failures).sum(),
    }
}

fn evaluate_offspring<S: Scorer + ?Sized>(
    dist: &SamplingDistribution,
    scorer: &S,
    seed: u64,
    generation: u32,
    island: usize,
    index: usize,
) -> Evaluation {
    let genotype = sample_individual(dist, seed, generation, island, index);
    scorer.evaluate(&genotype)
}

/// Mean of all pooled elites in island-major, slot-minor order. The fixed
/// order makes the result bitwise reproducible run to run.
pub fn aggregate(islands: &[IslandState]) -> Result<Genotype, EvolutionError> {
    let mut elites = Vec::new();
    for island in islands {
        if !island.at_capacity() {
            return Err(EvolutionError::PoolBelowCapacity { island: island.island_id });
        }
        elites.extend(island.entries.iter().map(|e| &e.genotype));
    }
    Ok(average(&elites)?)
}

/// Best-scoring individual ever evaluated, with where it was found.
#[derive(Clone, Debug)]
pub struct BestEver {
    pub genotype: Genotype,
    pub score: f64,
    pub generation: u32,
    pub island: usize,
    pub index: usize,
}

/// One convergence-log row, emitted at each generation barrier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub generation: u32,
    pub best_gen: f64,
    pub mean_gen: f64,
    pub best_ever: f64,
    pub evaluations: u64,
    pub failures: u32,
}

/// Everything the loop carries between generations; checkpoints persist
/// exactly this plus the already-emitted rows.
#[derive(Clone, Debug)]
pub struct EngineState {
    /// Completed generations; 0 before the first.
    pub generation: u32,
    pub mean: Genotype,
    pub variance: Vec<f64>,
    pub islands: Vec<IslandState>,
    pub best: Option<BestEver>,
}

impl EngineState {
    /// Starting state: variance derived from the base genotype, empty pools.
    pub fn fresh(config: &EvolutionConfig, base: Genotype) -> Result<EngineState, EvolutionError> {
        config.validate()?;
        let variance = derive_variance(&base, config.epsilon, config.sigma_floor)?;
        let islands = (0..config.islands)
            .map(|z| IslandState::new(z, config.pool_capacity()))
            .collect();
        Ok(EngineState { generation: 0, mean: base, variance, islands, best: None })
    }

    fn validate_against(&self, config: &EvolutionConfig) -> Result<(), EvolutionError> {
        let fail = |message: String| Err(EvolutionError::StateMismatch(message));
        if self.islands.len() != config.islands {
            return fail(format!(
                "{} islands in state, {} in config",
                self.islands.len(),
                config.islands
            ));
        }
        for (z, island) in self.islands.iter().enumerate() {
            if island.island_id != z {
                return fail(format!("island {z} carries id {}", island.island_id));
            }
            if island.capacity != config.pool_capacity() {
                return fail(format!(
                    "island {z} capacity {} != configured {}",
                    island.capacity,
                    config.pool_capacity()
                ));
            }
            if self.generation >= 1 && !island.at_capacity() {
                return fail(format!("island {z} pool below capacity after generation {}", self.generation));
            }
        }
        if self.variance.len() != self.mean.len() {
            return fail(format!(
                "variance length {} != genotype length {}",
                self.variance.len(),
                self.mean.len()
            ));
        }
        if self.generation > config.generations {
            return fail(format!(
                "state at generation {} beyond budget {}",
                self.generation, config.generations
            ));
        }
        Ok(())
    }
}

/// Observer view of one completed generation.
pub struct GenerationView<'a> {
    pub state: &'a EngineState,
    pub row: &'a CurveRow,
    /// Fitness of every offspring this generation, `[island][index]`.
    pub island_scores: &'a [Vec<f64>],
}

/// Record of the generations executed by one `run`/`resume` call.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub rows: Vec<CurveRow>,
    pub best: Option<BestEver>,
}

pub struct RunOutcome {
    pub record: RunRecord,
    pub state: EngineState,
}

/// Run the full loop from a base genotype.
pub fn run<S, F>(
    config: &EvolutionConfig,
    base: Genotype,
    scorer: &S,
    observer: F,
) -> Result<RunOutcome, EvolutionError>
where
    S: Scorer,
    F: FnMut(GenerationView<'_>),
{
    let state = EngineState::fresh(config, base)?;
    advance(config, state, scorer, observer)
}

/// Continue a run from a restored state until the configured budget.
pub fn resume<S, F>(
    config: &EvolutionConfig,
    state: EngineState,
    scorer: &S,
    observer: F,
) -> Result<RunOutcome, EvolutionError>
where
    S: Scorer,
    F: FnMut(GenerationView<'_>),
{
    config.validate()?;
    state.validate_against(config)?;
    advance(config, state, scorer, observer)
}

fn advance<S, F>(
    config: &EvolutionConfig,
    mut state: EngineState,
    scorer: &S,
    mut observer: F,
) -> Result<RunOutcome, EvolutionError>
where
    S: Scorer,
    F: FnMut(GenerationView<'_>),
{
    let islands = config.islands;
    let per_island = config.per_island();
    let threads = islands * config.evaluators_per_island;
    let pool = if scorer.concurrency_safe() && threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .expect("build evaluation thread pool"),
        )
    } else {
        None
    };

    let mut rows = Vec::new();
    for generation in state.generation + 1..=config.generations {
        let dist = SamplingDistribution::with_mean(
            state.mean.clone(),
            state.variance.clone(),
            config.epsilon,
            config.sigma_floor,
        )?;

        // Evaluate the whole generation. Results land in (island, index)
        // slots, so scheduling cannot influence anything downstream.
        let island_evals: Vec<Vec<Evaluation>> = match &pool {
            Some(pool) => pool.install(|| {
                (0..islands)
                    .into_par_iter()
                    .map(|island| {
                        (0..per_island)
                            .into_par_iter()
                            .map(|index| {
                                evaluate_offspring(&dist, scorer, config.seed, generation, island, index)
                            })
                            .collect()
                    })
                    .collect()
            }),
            None => (0..islands)
                .map(|island| {
                    (0..per_island)
                        .map(|index| {
                            evaluate_offspring(&dist, scorer, config.seed, generation, island, index)
                        })
                        .collect()
                })
                .collect(),
        };

        // Barrier: fold offspring into the pools in island, index order.
        for (island, evals) in state.islands.iter_mut().zip(&island_evals) {
            if config.elite_mode == EliteMode::PerGeneration {
                island.clear();
            }
            island.absorb(&dist, config.seed, generation, per_island, evals);
        }

        for (island, evals) in island_evals.iter().enumerate() {
            for (index, eval) in evals.iter().enumerate() {
                let improved = match &state.best {
                    Some(best) => eval.fitness > best.score,
                    None => true,
                };
                if improved {
                    state.best = Some(BestEver {
                        genotype: sample_individual(&dist, config.seed, generation, island, index),
                        score: eval.fitness,
                        generation,
                        island,
                        index,
                    });
                }
            }
        }

        state.mean = aggregate(&state.islands)?;
        state.generation = generation;

        let mut sum = 0.0;
        let mut best_gen = f64::NEG_INFINITY;
        let mut failures = 0u32;
        for evals in &island_evals {
            for eval in evals {
                sum += eval.fitness;
                if eval.fitness > best_gen {
                    best_gen = eval.fitness;
                }
                failures += eval.failures;
            }
        }
        let row = CurveRow {
            generation,
            best_gen,
            mean_gen: sum / config.lambda as f64,
            best_ever: state.best.as_ref().map(|b| b.score).unwrap_or(f64::NEG_INFINITY),
            evaluations: u64::from(generation) * config.lambda as u64,
            failures,
        };
        let island_scores: Vec<Vec<f64>> = island_evals
            .iter()
            .map(|evals| evals.iter().map(|e| e.fitness).collect())
            .collect();
        observer(GenerationView { state: &state, row: &row, island_scores: &island_scores });
        rows.push(row);
    }

    let best = state.best.clone();
    Ok(RunOutcome { record: RunRecord { rows, best }, state })
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvolutionError {
    InvalidConfig { field: &'static str, message: String },
    Genotype(GenotypeError),
    PoolBelowCapacity { island: usize },
    StateMismatch(String),
}

impl fmt::Display for EvolutionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvolutionError::InvalidConfig { field, message } => {
                write!(f, "invalid config: {field}: {message}")
            }
            EvolutionError::Genotype(e) => write!(f, "{e}"),
            EvolutionError::PoolBelowCapacity { island } => {
                write!(f, "island {island} elite pool below capacity at aggregation")
            }
            EvolutionError::StateMismatch(message) => {
                write!(f, "state does not match config: {message}")
            }
        }
    }
}

impl std::error::Error for EvolutionError {}

impl From<GenotypeError> for EvolutionError {
    fn from(e: GenotypeError) -> Self {
        EvolutionError::Genotype(e)
    }
}
