//! Island-model evolution strategy for grid-reasoning models.
//!
//! The engine evolves the flat parameter vector of a pluggable reasoner to
//! maximize an edit-distance similarity between its predicted answers and
//! ground truth on ARC-format tasks. Offspring are sampled from a Gaussian
//! whose per-layer variance is derived once from the starting parameters
//! and held fixed; islands evolve in parallel and meet only at a
//! per-generation aggregation barrier where the elite mean becomes the next
//! sampling centre.
//!
//! Modules:
//! - [`genotype`]: parameter vectors, the layer-wise variance rule, sampling.
//! - [`task`]: ARC task ingestion and grid-to-string serialization.
//! - [`score`]: Levenshtein similarity and task-level evaluation.
//! - [`reasoner`]: the phenotype interface plus the built-in toy model.
//! - [`remote`]: JSON-over-HTTP client for remote reasoners (scoring only).
//! - [`evolution`]: the generation loop, elite pools, and run records.
//! - [`rng`]: deterministic per-offspring random streams.

pub mod evolution;
pub mod genotype;
pub mod reasoner;
pub mod remote;
pub mod rng;
pub mod score;
pub mod task;

pub use evolution::{
    aggregate, island_step, resume, run, BestEver, CurveRow, EliteMode, EngineState, Evaluation,
    EvolutionConfig, EvolutionError, GenerationView, IslandState, RunOutcome, RunRecord, Scorer,
    TaskScorer,
};
pub use genotype::{
    average, derive_variance, Genotype, GenotypeError, LayerPartition, SamplingDistribution,
};
pub use reasoner::{toy_forward, PredictFailure, Reasoner, ToyReasoner, ToyReasonerSpec};
pub use remote::{remote_predict, RemoteError, RemoteReasoner, RemoteReasonerSpec};
pub use rng::NormalStream;
pub use score::{evaluate, levenshtein, meta_score, score, Score, TaskEvaluation};
pub use task::{load_task, load_task_set, parse_task, serialize_grid, ArcTask, Grid, TaskError};
