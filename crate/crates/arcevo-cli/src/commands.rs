//! The run / resume / score subcommands.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use arcevo::reasoner::ToyReasonerSpec;
use arcevo::remote::{remote_predict, RemoteReasonerSpec};
use arcevo::task::{load_task, load_task_set, serialize_grid, ArcTask};
use arcevo::{
    evaluate, score as pair_score, CurveRow, EngineState, Genotype, Scorer, TaskScorer, ToyReasoner,
};

use crate::checkpoint::{self, RunManifest, BEST_NAME, CHECKPOINT_DIR, LOG_NAME};
use crate::config::{self, ReasonerChoice, Settings, TaskSource};
use crate::report;
use crate::CliError;

/// Fixed row rendering for `curve.csv`; shortest round-trip float form, so
/// equal runs produce equal bytes.
pub fn format_row(row: &CurveRow) -> String {
    format!(
        "{},{},{},{},{},{}",
        row.generation, row.best_gen, row.mean_gen, row.best_ever, row.evaluations, row.failures
    )
}

fn load_tasks(settings: &Settings) -> Result<Vec<ArcTask>, CliError> {
    match &settings.task_source {
        TaskSource::Task(path) => {
            let task = load_task(path)
                .map_err(|e| CliError::Config(format!("config key 'task': {e}")))?;
            Ok(vec![task])
        }
        TaskSource::TaskSet(path) => load_task_set(path)
            .map_err(|e| CliError::Config(format!("config key 'task_set': {e}"))),
    }
}

fn toy_scorer(
    settings: &Settings,
) -> Result<(TaskScorer<ToyReasoner>, Arc<arcevo::LayerPartition>), CliError> {
    let tasks = load_tasks(settings)?;
    let spec = ToyReasonerSpec::infer_for_tasks(&tasks)
        .map_err(|e| CliError::Config(format!("config key 'task': {e}")))?;
    let partition = Arc::clone(spec.partition());
    Ok((TaskScorer::new(ToyReasoner::new(spec), tasks), partition))
}

pub fn run(config_path: &Path, out_flag: Option<PathBuf>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(config_path).map_err(|e| {
        CliError::Config(format!("cannot read config {}: {e}", config_path.display()))
    })?;
    let base_dir = config_path.parent().unwrap_or_else(|| Path::new("."));
    let settings = config::parse(&text, base_dir)?;
    if settings.reasoner == ReasonerChoice::Remote {
        return Err(CliError::Config(
            "config key 'reasoner': a remote model exposes no parameters to evolve; \
             use the score command against remote endpoints"
                .into(),
        ));
    }
    let out_dir = out_flag.or_else(|| settings.out_dir.clone()).ok_or_else(|| {
        CliError::Config("config key 'out_dir': missing (set it in the config or pass --out)".into())
    })?;

    let snapshot = config::canonical_snapshot(&settings);
    let hash = config::hash_snapshot(&snapshot);
    let created_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);

    let (scorer, partition) = toy_scorer(&settings)?;
    let base = Genotype::zeros(partition);
    let state = EngineState::fresh(&settings.engine, base)
        .map_err(|e| CliError::Config(e.to_string()))?;

    execute(&settings, &scorer, state, Vec::new(), &out_dir, &snapshot, &hash, created_unix)
}

pub fn resume(checkpoint_path: &Path, out_flag: Option<PathBuf>) -> Result<(), CliError> {
    let loaded = checkpoint::load(checkpoint_path)?;
    if config::hash_snapshot(&loaded.doc.config_snapshot) != loaded.doc.config_hash {
        return Err(CliError::Runtime(
            "checkpoint integrity: config snapshot does not match its recorded hash".into(),
        ));
    }
    let settings = config::parse(&loaded.doc.config_snapshot, Path::new("/"))?;
    let total = settings.engine.generations;
    if loaded.state.generation >= total {
        eprintln!(
            "run already complete: checkpoint at generation {} of {}; nothing to resume",
            loaded.state.generation, total
        );
        return Ok(());
    }

    let out_dir = match out_flag {
        Some(dir) => dir,
        None => {
            let ckpt_dir = if checkpoint_path.is_dir() {
                checkpoint_path.to_path_buf()
            } else {
                checkpoint_path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf()
            };
            let manifest_path = ckpt_dir.join(&loaded.doc.manifest);
            let manifest_path = std::fs::canonicalize(&manifest_path).map_err(|e| {
                CliError::Runtime(format!(
                    "cannot locate run manifest {} (pass --out to choose a directory): {e}",
                    manifest_path.display()
                ))
            })?;
            let run_dir = manifest_path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
            let manifest = RunManifest::load(&run_dir)?;
            if manifest.config_hash != loaded.doc.config_hash {
                return Err(CliError::Runtime(
                    "checkpoint belongs to a different run than the manifest it references \
                     (config hashes differ); pass --out to resume elsewhere"
                        .into(),
                ));
            }
            run_dir
        }
    };

    let (scorer, partition) = toy_scorer(&settings)?;
    if partition.as_ref() != loaded.state.mean.partition().as_ref() {
        return Err(CliError::Runtime(
            "checkpoint genotype layout does not match the configured tasks".into(),
        ));
    }
    eprintln!(
        "resuming at generation {} of {} into {}",
        loaded.state.generation + 1,
        total,
        out_dir.display()
    );
    execute(
        &settings,
        &scorer,
        loaded.state,
        loaded.doc.rows.clone(),
        &out_dir,
        &loaded.doc.config_snapshot,
        &loaded.doc.config_hash,
        loaded.doc.created_unix,
    )
}

/// Shared tail of run and resume: advance the engine to the budget while
/// streaming rows to `curve.csv`, checkpointing on the configured cadence,
/// and writing `best.genotype` at the end.
#[allow(clippy::too_many_arguments)]
fn execute<S: Scorer>(
    settings: &Settings,
    scorer: &S,
    state: EngineState,
    prior_rows: Vec<CurveRow>,
    out_dir: &Path,
    snapshot: &str,
    hash: &str,
    created_unix: u64,
) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out_dir.display())))?;
    RunManifest::new(created_unix, hash.to_string(), snapshot.to_string()).save(out_dir)?;

    let log_path = out_dir.join(LOG_NAME);
    let file = File::create(&log_path)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", log_path.display())))?;
    let mut log = BufWriter::new(file);
    let mut log_error: Option<String> = None;
    let write_line = |log: &mut BufWriter<File>, line: &str, err: &mut Option<String>| {
        if err.is_none() {
            if let Err(e) = writeln!(log, "{line}").and_then(|_| log.flush()) {
                *err = Some(format!("cannot write {}: {e}", log_path.display()));
            }
        }
    };
    write_line(&mut log, report::LOG_HEADER, &mut log_error);
    for row in &prior_rows {
        write_line(&mut log, &format_row(row), &mut log_error);
    }

    let total = settings.engine.generations;
    let every = settings.checkpoint_every;
    let mut all_rows = prior_rows;
    let mut checkpoint_error: Option<CliError> = None;
    let outcome = arcevo::resume(&settings.engine, state, scorer, |view| {
        write_line(&mut log, &format_row(view.row), &mut log_error);
        eprintln!(
            "generation {}/{}: best_gen={:.4} mean={:.4} best_ever={:.4} failures={}",
            view.row.generation,
            total,
            view.row.best_gen,
            view.row.mean_gen,
            view.row.best_ever,
            view.row.failures
        );
        all_rows.push(view.row.clone());
        let due = every > 0 && (view.row.generation % every == 0 || view.row.generation == total);
        if due && checkpoint_error.is_none() {
            let dir = out_dir
                .join(CHECKPOINT_DIR)
                .join(format!("gen_{:04}", view.row.generation));
            if let Err(e) = checkpoint::save(
                &dir,
                view.state,
                &all_rows,
                hash,
                snapshot,
                created_unix,
                "../../manifest.json",
            ) {
                checkpoint_error = Some(e);
            } else {
                eprintln!("checkpoint written: {}", dir.display());
            }
        }
    })
    .map_err(|e| CliError::Runtime(e.to_string()))?;

    if let Some(message) = log_error {
        return Err(CliError::Runtime(message));
    }
    if let Some(error) = checkpoint_error {
        return Err(error);
    }

    let best = outcome
        .state
        .best
        .as_ref()
        .ok_or_else(|| CliError::Runtime("run finished without evaluating anything".into()))?;
    checkpoint::save_genotype(&out_dir.join(BEST_NAME), &best.genotype)?;
    eprintln!(
        "done: best score {:.6} found at generation {} (island {}, index {}); artifacts in {}",
        best.score,
        best.generation,
        best.island,
        best.index,
        out_dir.display()
    );
    Ok(())
}

pub struct ScoreArgs {
    pub task: PathBuf,
    pub genotype: Option<PathBuf>,
    pub remote: Option<String>,
    pub prompt_template: Option<PathBuf>,
    pub remote_timeout_s: f64,
    pub remote_retries: u32,
}

pub fn score(args: ScoreArgs) -> Result<(), CliError> {
    let task = load_task(&args.task)
        .map_err(|e| CliError::Config(format!("task {}: {e}", args.task.display())))?;

    let value = match (&args.genotype, &args.remote) {
        (Some(genotype_path), None) => {
            let genotype = checkpoint::load_genotype(genotype_path)?;
            let spec =
                ToyReasonerSpec::infer(&task).map_err(|e| CliError::Runtime(e.to_string()))?;
            if genotype.partition().as_ref() != spec.partition().as_ref() {
                return Err(CliError::Runtime(format!(
                    "genotype of {} parameters does not match the task's {}-parameter layout",
                    genotype.len(),
                    spec.param_count()
                )));
            }
            evaluate(&ToyReasoner::new(spec), &genotype, &task).value()
        }
        (None, Some(url)) => {
            if !(args.remote_timeout_s.is_finite() && args.remote_timeout_s > 0.0) {
                return Err(CliError::Config("--remote-timeout-s must be positive".into()));
            }
            let mut spec =
                RemoteReasonerSpec::new(url.clone(), Duration::from_secs_f64(args.remote_timeout_s))
                    .with_max_retries(args.remote_retries);
            if let Some(template_path) = &args.prompt_template {
                let template = std::fs::read_to_string(template_path).map_err(|e| {
                    CliError::Config(format!("cannot read template {}: {e}", template_path.display()))
                })?;
                if !template.contains("{train_pairs}") || !template.contains("{test_input}") {
                    return Err(CliError::Config(
                        "prompt template must contain {train_pairs} and {test_input}".into(),
                    ));
                }
                spec = spec.with_template(template);
            }
            let mut total = 0.0;
            for (index, pair) in task.test.iter().enumerate() {
                match remote_predict(&spec, &task, &pair.input) {
                    Ok(answer) => {
                        total += pair_score(&answer, &serialize_grid(&pair.output)).value()
                    }
                    Err(failure) => eprintln!("test pair {index}: {failure}"),
                }
            }
            total / task.test.len() as f64
        }
        _ => unreachable!("clap enforces exactly one of --genotype / --remote"),
    };

    println!("{value:.4}");
    Ok(())
}

pub fn report(log_path: &Path, out_path: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(log_path)
        .map_err(|e| CliError::Config(format!("cannot read log {}: {e}", log_path.display())))?;
    let svg = report::render_svg(&text)?;
    std::fs::write(out_path, svg)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", out_path.display())))?;
    Ok(())
}
