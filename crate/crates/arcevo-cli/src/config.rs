//! Flat key/value run configuration.
//!
//! One `key = value` per line, `#` starts a comment. Documented keys:
//! `seed`, `lambda`, `mu`, `islands`, `generations`, `epsilon`,
//! `sigma_floor`, `elite_mode` (persistent | per_generation), `reasoner`
//! (toy | remote), `task` or `task_set` (path), `checkpoint_every`,
//! `out_dir`, `evaluators_per_island`, `remote_endpoint`,
//! `remote_timeout_s`, `remote_retries`. Unknown or duplicate keys are
//! rejected by name.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use arcevo::{EliteMode, EvolutionConfig};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReasonerChoice {
    Toy,
    Remote,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TaskSource {
    /// One task file.
    Task(PathBuf),
    /// Manifest listing several task files.
    TaskSet(PathBuf),
}

#[derive(Clone, Debug)]
pub struct RemoteSettings {
    pub endpoint: Option<String>,
    pub timeout_s: f64,
    pub retries: u32,
}

/// Fully parsed run settings: the engine parameters plus the reasoner and
/// task wiring around them.
#[derive(Clone, Debug)]
pub struct Settings {
    pub engine: EvolutionConfig,
    pub reasoner: ReasonerChoice,
    pub task_source: TaskSource,
    pub checkpoint_every: u32,
    pub out_dir: Option<PathBuf>,
    pub remote: RemoteSettings,
}

fn config_error(key: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("config key '{key}': {message}"))
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| config_error(key, e))
}

/// Parse a config document. Relative `task`/`task_set`/`out_dir` values
/// resolve against `base_dir` (normally the config file's directory).
pub fn parse(text: &str, base_dir: &Path) -> Result<Settings, CliError> {
    let mut pairs: BTreeMap<String, String> = BTreeMap::new();
    for (number, raw_line) in text.lines().enumerate() {
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "config line {}: expected key = value, got '{}'",
                number + 1,
                line
            )));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if pairs.insert(key.clone(), value).is_some() {
            return Err(config_error(&key, "appears more than once"));
        }
    }

    const KNOWN: &[&str] = &[
        "seed",
        "lambda",
        "mu",
        "islands",
        "generations",
        "epsilon",
        "sigma_floor",
        "elite_mode",
        "reasoner",
        "task",
        "task_set",
        "checkpoint_every",
        "out_dir",
        "evaluators_per_island",
        "remote_endpoint",
        "remote_timeout_s",
        "remote_retries",
    ];
    for key in pairs.keys() {
        if !KNOWN.contains(&key.as_str()) {
            return Err(config_error(key, "unknown key"));
        }
    }

    let mut take = |key: &str| pairs.remove(key);
    let require = |key: &str, value: Option<String>| {
        value.ok_or_else(|| config_error(key, "missing required key"))
    };

    let seed: u64 = parse_value("seed", &require("seed", take("seed"))?)?;
    let lambda: usize = parse_value("lambda", &require("lambda", take("lambda"))?)?;
    let mu: usize = parse_value("mu", &require("mu", take("mu"))?)?;
    let islands: usize = parse_value("islands", &require("islands", take("islands"))?)?;
    let generations: u32 =
        parse_value("generations", &require("generations", take("generations"))?)?;
    let epsilon: f64 = parse_value("epsilon", &require("epsilon", take("epsilon"))?)?;
    let sigma_floor: f64 = match take("sigma_floor") {
        Some(v) => parse_value("sigma_floor", &v)?,
        None => 0.01,
    };
    let elite_mode: EliteMode = match take("elite_mode") {
        Some(v) => v.parse().map_err(|e| config_error("elite_mode", e))?,
        None => EliteMode::Persistent,
    };
    let evaluators_per_island: usize = match take("evaluators_per_island") {
        Some(v) => parse_value("evaluators_per_island", &v)?,
        None => 1,
    };
    let checkpoint_every: u32 = match take("checkpoint_every") {
        Some(v) => parse_value("checkpoint_every", &v)?,
        None => 0,
    };
    let reasoner = match take("reasoner").as_deref() {
        None | Some("toy") => ReasonerChoice::Toy,
        Some("remote") => ReasonerChoice::Remote,
        Some(other) => {
            return Err(config_error("reasoner", format!("unknown reasoner '{other}'")))
        }
    };

    let task = take("task");
    let task_set = take("task_set");
    let task_source = match (task, task_set) {
        (Some(_), Some(_)) => {
            return Err(config_error("task", "set either task or task_set, not both"))
        }
        (Some(path), None) => TaskSource::Task(resolve(base_dir, &path)),
        (None, Some(path)) => TaskSource::TaskSet(resolve(base_dir, &path)),
        (None, None) => return Err(config_error("task", "missing required key (or task_set)")),
    };

    let out_dir = take("out_dir").map(|p| resolve(base_dir, &p));
    let remote = RemoteSettings {
        endpoint: take("remote_endpoint"),
        timeout_s: match take("remote_timeout_s") {
            Some(v) => parse_value("remote_timeout_s", &v)?,
            None => 10.0,
        },
        retries: match take("remote_retries") {
            Some(v) => parse_value("remote_retries", &v)?,
            None => 0,
        },
    };
    if remote.timeout_s <= 0.0 || !remote.timeout_s.is_finite() {
        return Err(config_error("remote_timeout_s", "must be positive"));
    }

    let engine = EvolutionConfig {
        lambda,
        mu,
        islands,
        generations,
        epsilon,
        sigma_floor,
        seed,
        elite_mode,
        evaluators_per_island,
    };
    engine.validate().map_err(|e| CliError::Config(e.to_string()))?;

    Ok(Settings { engine, reasoner, task_source, checkpoint_every, out_dir, remote })
}

fn resolve(base_dir: &Path, value: &str) -> PathBuf {
    let path = Path::new(value);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base_dir.join(path)
    }
}

/// Canonical experiment snapshot: every run-defining key in fixed order
/// with resolved paths. Where a run writes (`out_dir`) is not part of the
/// experiment and is excluded; resuming may redirect output freely.
pub fn canonical_snapshot(settings: &Settings) -> String {
    let engine = &settings.engine;
    let mut lines = vec![
        format!("checkpoint_every = {}", settings.checkpoint_every),
        format!("elite_mode = {}", engine.elite_mode),
        format!("epsilon = {}", engine.epsilon),
        format!("evaluators_per_island = {}", engine.evaluators_per_island),
        format!("generations = {}", engine.generations),
        format!("islands = {}", engine.islands),
        format!("lambda = {}", engine.lambda),
        format!("mu = {}", engine.mu),
        format!(
            "reasoner = {}",
            match settings.reasoner {
                ReasonerChoice::Toy => "toy",
                ReasonerChoice::Remote => "remote",
            }
        ),
        format!("seed = {}", engine.seed),
        format!("sigma_floor = {}", engine.sigma_floor),
    ];
    if let Some(endpoint) = &settings.remote.endpoint {
        lines.push(format!("remote_endpoint = {endpoint}"));
        lines.push(format!("remote_retries = {}", settings.remote.retries));
        lines.push(format!("remote_timeout_s = {}", settings.remote.timeout_s));
    }
    match &settings.task_source {
        TaskSource::Task(path) => lines.push(format!("task = {}", path.display())),
        TaskSource::TaskSet(path) => lines.push(format!("task_set = {}", path.display())),
    }
    lines.sort();
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

pub fn hash_snapshot(snapshot: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(snapshot.as_bytes());
    hex_string(&hasher.finalize())
}

pub fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
seed = 7
lambda = 16
mu = 4
islands = 4
generations = 3
epsilon = 0.1
task = puzzle.json
";

    #[test]
    fn minimal_config_parses_with_defaults() {
        let settings = parse(MINIMAL, Path::new("/work")).unwrap();
        assert_eq!(settings.engine.seed, 7);
        assert_eq!(settings.engine.lambda, 16);
        assert_eq!(settings.engine.sigma_floor, 0.01);
        assert_eq!(settings.engine.elite_mode, EliteMode::Persistent);
        assert_eq!(settings.reasoner, ReasonerChoice::Toy);
        assert_eq!(settings.task_source, TaskSource::Task(PathBuf::from("/work/puzzle.json")));
        assert_eq!(settings.checkpoint_every, 0);
        assert!(settings.out_dir.is_none());
    }

    #[test]
    fn unknown_key_is_named() {
        let text = format!("{MINIMAL}lambada = 3\n");
        let err = parse(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("lambada"), "{err}");
    }

    #[test]
    fn duplicate_key_is_named() {
        let text = format!("{MINIMAL}seed = 8\n");
        let err = parse(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
    }

    #[test]
    fn missing_required_key_is_named() {
        let err = parse("seed = 1\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("lambda"), "{err}");
    }

    #[test]
    fn bad_value_is_named() {
        let text = MINIMAL.replace("lambda = 16", "lambda = many");
        let err = parse(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("lambda"), "{err}");
    }

    #[test]
    fn engine_invariant_violations_surface_the_field() {
        let text = MINIMAL.replace("lambda = 16", "lambda = 17");
        let err = parse(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("lambda"), "{err}");
    }

    #[test]
    fn task_and_task_set_are_mutually_exclusive() {
        let text = format!("{MINIMAL}task_set = set.txt\n");
        let err = parse(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("not both"), "{err}");
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = format!("# a run\n\n{MINIMAL}  # trailing\n");
        assert!(parse(&text, Path::new(".")).is_ok());
    }

    #[test]
    fn snapshot_is_stable_and_hashable() {
        let settings = parse(MINIMAL, Path::new("/work")).unwrap();
        let snapshot = canonical_snapshot(&settings);
        assert_eq!(snapshot, canonical_snapshot(&settings));
        assert!(snapshot.contains("task = /work/puzzle.json"));
        assert!(!snapshot.contains("out_dir"));
        let hash = hash_snapshot(&snapshot);
        assert_eq!(hash.len(), 64);
        assert_eq!(hash, hash_snapshot(&snapshot));
    }

    #[test]
    fn snapshot_reparses_to_the_same_settings() {
        let settings = parse(MINIMAL, Path::new("/work")).unwrap();
        let snapshot = canonical_snapshot(&settings);
        let again = parse(&snapshot, Path::new("/elsewhere")).unwrap();
        assert_eq!(again.engine, settings.engine);
        assert_eq!(again.task_source, settings.task_source);
        assert_eq!(again.checkpoint_every, settings.checkpoint_every);
    }
}
