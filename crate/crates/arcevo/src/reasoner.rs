//! The evolvable phenotype: maps a test input grid to a predicted answer
//! string under a given parameter vector.
//!
//! Ships a toy model — a per-cell affine classifier over one-hot encoded
//! colors — that stands in for a large network at desk scale while keeping
//! the layer structure (a weight layer and a bias layer) non-trivial.

use std::fmt;
use std::sync::Arc;

use crate::genotype::{Genotype, LayerPartition};
use crate::task::{serialize_grid, ArcTask, Grid};

pub const COLORS: usize = 10;

/// Why a single prediction produced no usable answer. Evaluation maps every
/// kind to a pair score of 0 and counts it; nothing aborts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PredictFailure {
    /// Input grid or genotype does not fit the model's shape.
    ShapeMismatch(String),
    /// Remote call exceeded its deadline.
    Timeout,
    /// Remote endpoint answered with a non-2xx status.
    HttpStatus(u16),
    /// Remote reply carried no usable `"answer"` field.
    MissingAnswerField,
    /// Connect/send/receive failed below the protocol level.
    Transport(String),
}

impl fmt::Display for PredictFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredictFailure::ShapeMismatch(detail) => write!(f, "shape mismatch: {detail}"),
            PredictFailure::Timeout => write!(f, "timeout"),
            PredictFailure::HttpStatus(code) => write!(f, "http status {code}"),
            PredictFailure::MissingAnswerField => write!(f, "reply missing \"answer\" field"),
            PredictFailure::Transport(detail) => write!(f, "transport failure: {detail}"),
        }
    }
}

/// Anything that can answer a task's test input with a string.
pub trait Reasoner {
    fn predict(
        &self,
        genotype: &Genotype,
        task: &ArcTask,
        input: &Grid,
    ) -> Result<String, PredictFailure>;

    /// Whether `predict` may be called from several threads at once. The
    /// engine serializes evaluation when this is false.
    fn concurrency_safe(&self) -> bool {
        true
    }
}

/// Shape of the toy model: fixed input and output grid dimensions plus the
/// two-layer parameter layout derived from them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToyReasonerSpec {
    pub in_height: usize,
    pub in_width: usize,
    pub out_height: usize,
    pub out_width: usize,
    partition: Arc<LayerPartition>,
}

impl ToyReasonerSpec {
    pub fn new(
        in_height: usize,
        in_width: usize,
        out_height: usize,
        out_width: usize,
    ) -> ToyReasonerSpec {
        assert!(in_height > 0 && in_width > 0 && out_height > 0 && out_width > 0);
        let in_units = in_height * in_width * COLORS;
        let out_units = out_height * out_width * COLORS;
        let partition = Arc::new(
            LayerPartition::new(vec![("weights", out_units * in_units), ("bias", out_units)])
                .expect("two non-empty layers"),
        );
        ToyReasonerSpec { in_height, in_width, out_height, out_width, partition }
    }

    /// Infer the spec from a task. Every input grid must share one shape and
    /// every output grid another; tasks that vary shapes do not fit the toy
    /// model.
    pub fn infer(task: &ArcTask) -> Result<ToyReasonerSpec, ShapeVaryingTask> {
        Self::infer_for_tasks(std::slice::from_ref(task))
    }

    /// Infer one spec covering several tasks, for task-set runs.
    pub fn infer_for_tasks(tasks: &[ArcTask]) -> Result<ToyReasonerSpec, ShapeVaryingTask> {
        let mut in_shape: Option<(usize, usize)> = None;
        let mut out_shape: Option<(usize, usize)> = None;
        let record = |slot: &mut Option<(usize, usize)>,
                          grid: &Grid,
                          task_id: &str|
         -> Result<(), ShapeVaryingTask> {
            let shape = (grid.height(), grid.width());
            match slot {
                None => {
                    *slot = Some(shape);
                    Ok(())
                }
                Some(existing) if *existing == shape => Ok(()),
                Some(existing) => Err(ShapeVaryingTask {
                    task_id: task_id.to_string(),
                    expected: *existing,
                    got: shape,
                }),
            }
        };
        for task in tasks {
            for pair in task.train.iter().chain(&task.test) {
                record(&mut in_shape, &pair.input, &task.id)?;
                record(&mut out_shape, &pair.output, &task.id)?;
            }
        }
        let (ih, iw) = in_shape.expect("tasks have at least one pair");
        let (oh, ow) = out_shape.expect("tasks have at least one pair");
        Ok(ToyReasonerSpec::new(ih, iw, oh, ow))
    }

    pub fn partition(&self) -> &Arc<LayerPartition> {
        &self.partition
    }

    pub fn param_count(&self) -> usize {
        self.partition.total_len()
    }

    fn in_units(&self) -> usize {
        self.in_height * self.in_width * COLORS
    }

    /// Index of the weight from input unit (cell `in_cell`, color `in_color`)
    /// into the logit of (cell `out_cell`, color `out_color`).
    pub fn weight_index(
        &self,
        out_cell: usize,
        out_color: usize,
        in_cell: usize,
        in_color: usize,
    ) -> usize {
        (out_cell * COLORS + out_color) * self.in_units() + in_cell * COLORS + in_color
    }

    /// Index of the bias for (cell `out_cell`, color `out_color`), relative
    /// to the start of the bias layer.
    pub fn bias_index(&self, out_cell: usize, out_color: usize) -> usize {
        out_cell * COLORS + out_color
    }
}

/// One-hot encode the input over the ten colors, apply the affine map, and
/// color each output cell by the argmax of its ten logits, ties broken by
/// the lowest color index. Fully deterministic.
pub fn toy_forward(
    spec: &ToyReasonerSpec,
    genotype: &Genotype,
    input: &Grid,
) -> Result<Grid, PredictFailure> {
    if input.height() != spec.in_height || input.width() != spec.in_width {
        return Err(PredictFailure::ShapeMismatch(format!(
            "input {}x{} does not match model input {}x{}",
            input.height(),
            input.width(),
            spec.in_height,
            spec.in_width,
        )));
    }
    if genotype.partition().as_ref() != spec.partition.as_ref() {
        return Err(PredictFailure::ShapeMismatch(format!(
            "genotype of {} parameters does not match model layout of {}",
            genotype.len(),
            spec.param_count(),
        )));
    }
    let in_units = spec.in_units();
    let out_cells = spec.out_height * spec.out_width;
    let weights = &genotype.values()[..out_cells * COLORS * in_units];
    let bias = &genotype.values()[out_cells * COLORS * in_units..];

    let mut cells = Vec::with_capacity(out_cells);
    for out_cell in 0..out_cells {
        let mut best_color = 0u8;
        let mut best_logit = f64::NEG_INFINITY;
        for color in 0..COLORS {
            let out_unit = out_cell * COLORS + color;
            let row = &weights[out_unit * in_units..(out_unit + 1) * in_units];
            let mut logit = bias[out_unit];
            for (in_cell, &value) in input.cells().iter().enumerate() {
                logit += row[in_cell * COLORS + value as usize];
            }
            if logit > best_logit {
                best_logit = logit;
                best_color = color as u8;
            }
        }
        cells.push(best_color);
    }
    Ok(Grid::new(spec.out_height, spec.out_width, cells).expect("argmax colors are in range"))
}

/// The toy model as a [`Reasoner`]: forward pass plus grid serialization.
#[derive(Clone, Debug)]
pub struct ToyReasoner {
    spec: ToyReasonerSpec,
}

impl ToyReasoner {
    pub fn new(spec: ToyReasonerSpec) -> ToyReasoner {
        ToyReasoner { spec }
    }

    pub fn spec(&self) -> &ToyReasonerSpec {
        &self.spec
    }
}

impl Reasoner for ToyReasoner {
    fn predict(
        &self,
        genotype: &Genotype,
        _task: &ArcTask,
        input: &Grid,
    ) -> Result<String, PredictFailure> {
        toy_forward(&self.spec, genotype, input).map(|grid| serialize_grid(&grid))
    }
}

/// Input or output shapes differ across a task's pairs (or across a task
/// set), which the fixed-shape toy model cannot represent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShapeVaryingTask {
    pub task_id: String,
    pub expected: (usize, usize),
    pub got: (usize, usize),
}

impl fmt::Display for ShapeVaryingTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "shape-varying task unsupported by toy reasoner: task '{}' mixes {}x{} and {}x{} grids",
            self.task_id, self.expected.0, self.expected.1, self.got.0, self.got.1,
        )
    }
}

impl std::error::Error for ShapeVaryingTask {}
