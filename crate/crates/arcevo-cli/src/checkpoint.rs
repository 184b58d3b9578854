//! Run manifest and checkpoint persistence.
//!
//! A run directory holds `manifest.json` (config snapshot, its hash, engine
//! version, artifact paths), `curve.csv`, `best.genotype`, and a
//! `checkpoints/` tree. Each checkpoint is a JSON document plus sidecar
//! arrays of little-endian IEEE-754 doubles, one file per array, each with
//! a recorded length and SHA-256 so truncation or corruption is caught on
//! load. Everything needed to continue the run byte-identically is inside
//! the checkpoint, including the convergence rows emitted so far.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use arcevo::evolution::{BestEver, ElitePoolEntry, IslandState};
use arcevo::genotype::LayerPartition;
use arcevo::{CurveRow, EngineState, Genotype};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::hex_string;
use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;
pub const LOG_NAME: &str = "curve.csv";
pub const BEST_NAME: &str = "best.genotype";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const MANIFEST_NAME: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

/// Top-level record of one run directory.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub format_version: u32,
    pub engine_version: String,
    pub created_unix: u64,
    pub config_hash: String,
    pub config_snapshot: String,
    pub log: String,
    pub checkpoint_dir: String,
    pub best_genotype: String,
}

impl RunManifest {
    pub fn new(created_unix: u64, config_hash: String, config_snapshot: String) -> RunManifest {
        RunManifest {
            format_version: FORMAT_VERSION,
            engine_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix,
            config_hash,
            config_snapshot,
            log: LOG_NAME.to_string(),
            checkpoint_dir: CHECKPOINT_DIR.to_string(),
            best_genotype: BEST_NAME.to_string(),
        }
    }

    pub fn save(&self, out_dir: &Path) -> Result<(), CliError> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Runtime(format!("serialize manifest: {e}")))?;
        write_file(&out_dir.join(MANIFEST_NAME), json.as_bytes())
    }

    pub fn load(out_dir: &Path) -> Result<RunManifest, CliError> {
        let path = out_dir.join(MANIFEST_NAME);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Runtime(format!("malformed manifest {}: {e}", path.display())))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LayerEntry {
    pub name: String,
    pub len: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ArrayRef {
    pub file: String,
    pub len: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EliteEntryRef {
    pub array: ArrayRef,
    pub score: f64,
    pub ordinal: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct IslandRef {
    pub island_id: usize,
    pub capacity: usize,
    pub entries: Vec<EliteEntryRef>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BestRef {
    pub array: ArrayRef,
    pub score: f64,
    pub generation: u32,
    pub island: usize,
    pub index: usize,
}

/// The JSON half of one checkpoint; array payloads live in sidecar files.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CheckpointDoc {
    pub format_version: u32,
    pub engine_version: String,
    /// Relative path to the run manifest this checkpoint belongs to.
    pub manifest: String,
    pub created_unix: u64,
    pub config_hash: String,
    pub config_snapshot: String,
    pub generation: u32,
    pub partition: Vec<LayerEntry>,
    pub mean: ArrayRef,
    pub variance: ArrayRef,
    pub islands: Vec<IslandRef>,
    pub best: Option<BestRef>,
    pub rows: Vec<CurveRow>,
}

/// A checkpoint in memory: the document plus the restored engine state.
#[derive(Debug)]
pub struct Checkpoint {
    pub doc: CheckpointDoc,
    pub state: EngineState,
}

fn f64_bytes(values: &[f64]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

fn f64_from_bytes(bytes: &[u8]) -> Result<Vec<f64>, CliError> {
    if bytes.len() % 8 != 0 {
        return Err(CliError::Runtime("checkpoint integrity: array not a multiple of 8 bytes".into()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex_string(&hasher.finalize())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn write_array(dir: &Path, file: String, values: &[f64]) -> Result<ArrayRef, CliError> {
    let bytes = f64_bytes(values);
    let sha256 = sha256_hex(&bytes);
    write_file(&dir.join(&file), &bytes)?;
    Ok(ArrayRef { file, len: values.len(), sha256 })
}

fn read_array(dir: &Path, reference: &ArrayRef) -> Result<Vec<f64>, CliError> {
    let path = dir.join(&reference.file);
    let bytes = std::fs::read(&path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    if sha256_hex(&bytes) != reference.sha256 {
        return Err(CliError::Runtime(format!(
            "checkpoint integrity: {} does not match its recorded hash",
            reference.file
        )));
    }
    let values = f64_from_bytes(&bytes)?;
    if values.len() != reference.len {
        return Err(CliError::Runtime(format!(
            "checkpoint integrity: {} holds {} values, expected {}",
            reference.file,
            values.len(),
            reference.len
        )));
    }
    Ok(values)
}

/// Write one checkpoint directory from engine state and run metadata.
pub fn save(
    dir: &Path,
    state: &EngineState,
    rows: &[CurveRow],
    config_hash: &str,
    config_snapshot: &str,
    created_unix: u64,
    manifest_relative: &str,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;

    let partition: Vec<LayerEntry> = state
        .mean
        .partition()
        .layers()
        .iter()
        .map(|l| LayerEntry { name: l.name.clone(), len: l.len })
        .collect();
    let mean = write_array(dir, "mean.f64le".into(), state.mean.values())?;
    let variance = write_array(dir, "variance.f64le".into(), &state.variance)?;
    let mut islands = Vec::with_capacity(state.islands.len());
    for island in &state.islands {
        let mut entries = Vec::with_capacity(island.entries().len());
        for (slot, entry) in island.entries().iter().enumerate() {
            let file = format!("island{}_slot{}.f64le", island.island_id(), slot);
            entries.push(EliteEntryRef {
                array: write_array(dir, file, entry.genotype.values())?,
                score: entry.score,
                ordinal: entry.ordinal,
            });
        }
        islands.push(IslandRef {
            island_id: island.island_id(),
            capacity: island.capacity(),
            entries,
        });
    }
    let best = match &state.best {
        Some(best) => Some(BestRef {
            array: write_array(dir, "best.f64le".into(), best.genotype.values())?,
            score: best.score,
            generation: best.generation,
            island: best.island,
            index: best.index,
        }),
        None => None,
    };

    let doc = CheckpointDoc {
        format_version: FORMAT_VERSION,
        engine_version: env!("CARGO_PKG_VERSION").to_string(),
        manifest: manifest_relative.to_string(),
        created_unix,
        config_hash: config_hash.to_string(),
        config_snapshot: config_snapshot.to_string(),
        generation: state.generation,
        partition,
        mean,
        variance,
        islands,
        best,
        rows: rows.to_vec(),
    };
    let json = serde_json::to_string_pretty(&doc)
        .map_err(|e| CliError::Runtime(format!("serialize checkpoint: {e}")))?;
    write_file(&dir.join(CHECKPOINT_FILE), json.as_bytes())
}

/// Load a checkpoint from its directory (or a direct path to its JSON
/// document), verifying format version and array integrity.
pub fn load(path: &Path) -> Result<Checkpoint, CliError> {
    let (dir, doc_path): (PathBuf, PathBuf) = if path.is_dir() {
        (path.to_path_buf(), path.join(CHECKPOINT_FILE))
    } else {
        let dir = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        (dir, path.to_path_buf())
    };
    let text = std::fs::read_to_string(&doc_path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", doc_path.display())))?;
    let doc: CheckpointDoc = serde_json::from_str(&text)
        .map_err(|e| CliError::Runtime(format!("malformed checkpoint {}: {e}", doc_path.display())))?;
    if doc.format_version != FORMAT_VERSION {
        return Err(CliError::Runtime(format!(
            "checkpoint format version {} is not compatible with this engine (expected {})",
            doc.format_version, FORMAT_VERSION
        )));
    }

    let partition = Arc::new(
        LayerPartition::new(doc.partition.iter().map(|l| (l.name.clone(), l.len)).collect())
            .map_err(|e| CliError::Runtime(format!("checkpoint partition: {e}")))?,
    );
    let genotype = |values: Vec<f64>| -> Result<Genotype, CliError> {
        Genotype::new(values, Arc::clone(&partition))
            .map_err(|e| CliError::Runtime(format!("checkpoint genotype: {e}")))
    };

    let mean = genotype(read_array(&dir, &doc.mean)?)?;
    let variance = read_array(&dir, &doc.variance)?;
    let mut islands = Vec::with_capacity(doc.islands.len());
    for island_ref in &doc.islands {
        let mut entries = Vec::with_capacity(island_ref.entries.len());
        for entry in &island_ref.entries {
            entries.push(ElitePoolEntry {
                genotype: genotype(read_array(&dir, &entry.array)?)?,
                score: entry.score,
                ordinal: entry.ordinal,
            });
        }
        islands.push(
            IslandState::restore(island_ref.island_id, island_ref.capacity, entries)
                .map_err(|e| CliError::Runtime(format!("checkpoint island: {e}")))?,
        );
    }
    let best = match &doc.best {
        Some(best_ref) => Some(BestEver {
            genotype: genotype(read_array(&dir, &best_ref.array)?)?,
            score: best_ref.score,
            generation: best_ref.generation,
            island: best_ref.island,
            index: best_ref.index,
        }),
        None => None,
    };

    let state = EngineState { generation: doc.generation, mean, variance, islands, best };
    Ok(Checkpoint { doc, state })
}

/// Self-contained genotype file: the layer layout plus the values.
#[derive(Serialize, Deserialize)]
pub struct GenotypeFile {
    pub partition: Vec<LayerEntry>,
    pub values: Vec<f64>,
}

pub fn save_genotype(path: &Path, genotype: &Genotype) -> Result<(), CliError> {
    let file = GenotypeFile {
        partition: genotype
            .partition()
            .layers()
            .iter()
            .map(|l| LayerEntry { name: l.name.clone(), len: l.len })
            .collect(),
        values: genotype.values().to_vec(),
    };
    let json = serde_json::to_string(&file)
        .map_err(|e| CliError::Runtime(format!("serialize genotype: {e}")))?;
    write_file(path, json.as_bytes())
}

pub fn load_genotype(path: &Path) -> Result<Genotype, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read genotype {}: {e}", path.display())))?;
    let file: GenotypeFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("malformed genotype {}: {e}", path.display())))?;
    let partition = Arc::new(
        LayerPartition::new(file.partition.into_iter().map(|l| (l.name, l.len)).collect())
            .map_err(|e| CliError::Config(format!("genotype partition: {e}")))?,
    );
    Genotype::new(file.values, partition)
        .map_err(|e| CliError::Config(format!("genotype values: {e}")))
}
