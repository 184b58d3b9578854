//! ARC-format task ingestion and grid serialization.
//!
//! Tasks are single-file JSON documents of the shape
//! `{"train":[{"input":[[..]],"output":[[..]]}],"test":[..]}` with colors
//! 0..=9. Grids serialize to strings for edit-distance scoring: one decimal
//! digit per cell, rows joined by `'|'`.

use std::fmt;
use std::path::Path;

use serde::Deserialize;

/// Rectangular grid of color codes 0..=9, stored row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grid {
    height: usize,
    width: usize,
    cells: Vec<u8>,
}

impl Grid {
    pub fn new(height: usize, width: usize, cells: Vec<u8>) -> Result<Self, TaskError> {
        if height == 0 || width == 0 {
            return Err(TaskError::EmptyGrid);
        }
        if cells.len() != height * width {
            return Err(TaskError::CellCountMismatch { expected: height * width, got: cells.len() });
        }
        if let Some(&c) = cells.iter().find(|c| **c > 9) {
            return Err(TaskError::ColorOutOfRange(i64::from(c)));
        }
        Ok(Grid { height, width, cells })
    }

    fn from_rows(rows: &[Vec<i64>]) -> Result<Self, TaskError> {
        let height = rows.len();
        if height == 0 {
            return Err(TaskError::EmptyGrid);
        }
        let width = rows[0].len();
        if width == 0 {
            return Err(TaskError::EmptyGrid);
        }
        let mut cells = Vec::with_capacity(height * width);
        for row in rows {
            if row.len() != width {
                return Err(TaskError::RaggedGrid);
            }
            for &v in row {
                if !(0..=9).contains(&v) {
                    return Err(TaskError::ColorOutOfRange(v));
                }
                cells.push(v as u8);
            }
        }
        Ok(Grid { height, width, cells })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn cell(&self, row: usize, col: usize) -> u8 {
        self.cells[row * self.width + col]
    }
}

/// Render a grid as digits, rows joined by `'|'`, no trailing separator.
/// The output length is always `height * width + height - 1`.
pub fn serialize_grid(grid: &Grid) -> String {
    let mut out = String::with_capacity(grid.height * grid.width + grid.height - 1);
    for (i, row) in grid.cells.chunks(grid.width).enumerate() {
        if i > 0 {
            out.push('|');
        }
        for &cell in row {
            out.push(char::from(b'0' + cell));
        }
    }
    out
}

/// One input grid and the expected output grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridPair {
    pub input: Grid,
    pub output: Grid,
}

/// A reasoning task: few-shot train pairs plus test pairs with ground truth.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArcTask {
    pub id: String,
    pub train: Vec<GridPair>,
    pub test: Vec<GridPair>,
}

#[derive(Deserialize)]
struct RawPair {
    input: Vec<Vec<i64>>,
    #[serde(default)]
    output: Option<Vec<Vec<i64>>>,
}

#[derive(Deserialize)]
struct RawTask {
    #[serde(default)]
    id: Option<String>,
    train: Vec<RawPair>,
    test: Vec<RawPair>,
}

fn convert_pairs(raw: Vec<RawPair>, section: &'static str) -> Result<Vec<GridPair>, TaskError> {
    raw.into_iter()
        .map(|pair| {
            let input = Grid::from_rows(&pair.input)?;
            let output = match pair.output {
                Some(rows) => Grid::from_rows(&rows)?,
                None => return Err(TaskError::MissingTruth { section }),
            };
            Ok(GridPair { input, output })
        })
        .collect()
}

/// Parse one task document. `fallback_id` (typically the file stem) is used
/// when the document carries no `"id"` field.
pub fn parse_task(document: &str, fallback_id: &str) -> Result<ArcTask, TaskError> {
    let raw: RawTask = serde_json::from_str(document).map_err(|e| TaskError::Json(e.to_string()))?;
    if raw.train.is_empty() {
        return Err(TaskError::EmptyTrain);
    }
    if raw.test.is_empty() {
        return Err(TaskError::EmptyTest);
    }
    let id = raw.id.unwrap_or_else(|| fallback_id.to_string());
    Ok(ArcTask {
        id,
        train: convert_pairs(raw.train, "train")?,
        test: convert_pairs(raw.test, "test")?,
    })
}

/// Read and parse one task file; the file stem becomes the fallback id.
pub fn load_task(path: &Path) -> Result<ArcTask, TaskError> {
    let document = std::fs::read_to_string(path)
        .map_err(|e| TaskError::Io { path: path.display().to_string(), error: e.to_string() })?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("task");
    parse_task(&document, stem)
}

/// Load a task-set manifest: one task path per line, `#` starts a comment,
/// relative paths resolve against the manifest's directory.
pub fn load_task_set(manifest: &Path) -> Result<Vec<ArcTask>, TaskError> {
    let text = std::fs::read_to_string(manifest)
        .map_err(|e| TaskError::Io { path: manifest.display().to_string(), error: e.to_string() })?;
    let base = manifest.parent().unwrap_or_else(|| Path::new("."));
    let mut tasks = Vec::new();
    for line in text.lines() {
        let entry = line.split('#').next().unwrap_or("").trim();
        if entry.is_empty() {
            continue;
        }
        let path = base.join(entry);
        tasks.push(load_task(&path)?);
    }
    if tasks.is_empty() {
        return Err(TaskError::EmptyTaskSet);
    }
    Ok(tasks)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TaskError {
    Io { path: String, error: String },
    Json(String),
    RaggedGrid,
    ColorOutOfRange(i64),
    EmptyGrid,
    CellCountMismatch { expected: usize, got: usize },
    EmptyTrain,
    EmptyTest,
    MissingTruth { section: &'static str },
    EmptyTaskSet,
}

impl fmt::Display for TaskError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskError::Io { path, error } => write!(f, "cannot read {path}: {error}"),
            TaskError::Json(e) => write!(f, "malformed task document: {e}"),
            TaskError::RaggedGrid => write!(f, "ragged grid: rows differ in length"),
            TaskError::ColorOutOfRange(v) => write!(f, "color out of range: {v} not in 0..=9"),
            TaskError::EmptyGrid => write!(f, "empty grid"),
            TaskError::CellCountMismatch { expected, got } => {
                write!(f, "expected {expected} cells, got {got}")
            }
            TaskError::EmptyTrain => write!(f, "task has no train pairs"),
            TaskError::EmptyTest => write!(f, "task has no test pairs"),
            TaskError::MissingTruth { section } => {
                write!(f, "{section} pair lacks ground-truth output; evaluation splits are unsupported")
            }
            TaskError::EmptyTaskSet => write!(f, "task-set manifest lists no tasks"),
        }
    }
}

impl std::error::Error for TaskError {}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn any_valid_grid_round_trips(h in 1usize..8, w in 1usize..8, seed in 0u64..1000) {
            let mut s = crate::rng::NormalStream::new(seed);
            let cells: Vec<u8> = (0..h * w).map(|_| (s.next_u64() % 10) as u8).collect();
            let grid = Grid::new(h, w, cells).unwrap();
            let text = serialize_grid(&grid);
            prop_assert_eq!(text.len(), h * w + h - 1);
            let rows: Vec<Vec<i64>> = text
                .split('|')
                .map(|row| row.bytes().map(|b| i64::from(b - b'0')).collect())
                .collect();
            prop_assert_eq!(Grid::from_rows(&rows).unwrap(), grid);
        }
    }
}
