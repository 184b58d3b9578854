//! Parameter vectors with layer structure, the layer-wise exploration
//! variance rule, and Gaussian offspring sampling.
//!
//! A [`Genotype`] is the flat vector of model parameters being evolved. Its
//! [`LayerPartition`] splits the vector into named contiguous segments; the
//! exploration variance is constant within each segment and proportional to
//! the mean absolute parameter value of that segment.

use std::fmt;
use std::sync::Arc;

use crate::rng::NormalStream;

/// One named contiguous segment of a parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layer {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

/// Ordered, contiguous, non-overlapping cover of `[0, total_len)`.
///
/// Built from (name, length) pairs so the invariants hold by construction;
/// names must be unique and every length at least 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerPartition {
    layers: Vec<Layer>,
    total_len: usize,
}

impl LayerPartition {
    pub fn new<S: Into<String>>(segments: Vec<(S, usize)>) -> Result<Self, GenotypeError> {
        if segments.is_empty() {
            return Err(GenotypeError::EmptyPartition);
        }
        let mut layers = Vec::with_capacity(segments.len());
        let mut start = 0;
        for (name, len) in segments {
            let name = name.into();
            if len == 0 {
                return Err(GenotypeError::ZeroLengthLayer { name });
            }
            if layers.iter().any(|l: &Layer| l.name == name) {
                return Err(GenotypeError::DuplicateLayerName { name });
            }
            layers.push(Layer { name, start, len });
            start += len;
        }
        Ok(LayerPartition { layers, total_len: start })
    }

    /// Single-layer partition covering `len` parameters.
    pub fn single(name: &str, len: usize) -> Result<Self, GenotypeError> {
        LayerPartition::new(vec![(name, len)])
    }

    pub fn total_len(&self) -> usize {
        self.total_len
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }
}

/// Flat vector of finite parameters plus its layer partition. Immutable
/// after construction; the partition is shared, so clones are cheap to key
/// sampling and aggregation off the same structure.
#[derive(Clone, Debug, PartialEq)]
pub struct Genotype {
    values: Vec<f64>,
    partition: Arc<LayerPartition>,
}

impl Genotype {
    pub fn new(values: Vec<f64>, partition: Arc<LayerPartition>) -> Result<Self, GenotypeError> {
        if values.len() != partition.total_len() {
            return Err(GenotypeError::LengthMismatch {
                values: values.len(),
                partition: partition.total_len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(GenotypeError::NonFiniteValue { index });
        }
        Ok(Genotype { values, partition })
    }

    /// All-zero genotype over `partition`.
    pub fn zeros(partition: Arc<LayerPartition>) -> Self {
        let values = vec![0.0; partition.total_len()];
        Genotype { values, partition }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn partition(&self) -> &Arc<LayerPartition> {
        &self.partition
    }

    /// True when both carry exactly the same parameter bits.
    pub fn bitwise_eq(&self, other: &Genotype) -> bool {
        self.partition == other.partition
            && self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Derive the per-parameter exploration variance from a base genotype.
///
/// For every parameter in layer L the variance is
/// `max(sigma_floor, epsilon * mean(|base[L]|))`: one value per layer,
/// scaled to that layer's typical parameter magnitude. Absolute values keep
/// the result non-negative, and the floor keeps all-zero layers (a zero
/// bias, say) from freezing forever.
pub fn derive_variance(
    base: &Genotype,
    epsilon: f64,
    sigma_floor: f64,
) -> Result<Vec<f64>, GenotypeError> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(GenotypeError::EpsilonOutOfRange { epsilon });
    }
    if !sigma_floor.is_finite() || sigma_floor < 0.0 {
        return Err(GenotypeError::NegativeSigmaFloor { sigma_floor });
    }
    let mut variance = vec![0.0; base.len()];
    for layer in base.partition().layers() {
        let segment = &base.values()[layer.start..layer.start + layer.len];
        let mean_abs = segment.iter().map(|v| v.abs()).sum::<f64>() / layer.len as f64;
        let v = (epsilon * mean_abs).max(sigma_floor);
        variance[layer.start..layer.start + layer.len].fill(v);
    }
    Ok(variance)
}

/// Gaussian sampling distribution: mean genotype, diagonal variance
/// (constant within each layer), and the strength parameters it was derived
/// from. The variance is derived once and never recomputed.
#[derive(Clone, Debug)]
pub struct SamplingDistribution {
    mean: Genotype,
    variance: Vec<f64>,
    epsilon: f64,
    sigma_floor: f64,
}

impl SamplingDistribution {
    /// Derive the variance from `base` and centre the distribution on it.
    pub fn from_base(base: Genotype, epsilon: f64, sigma_floor: f64) -> Result<Self, GenotypeError> {
        let variance = derive_variance(&base, epsilon, sigma_floor)?;
        Ok(SamplingDistribution { mean: base, variance, epsilon, sigma_floor })
    }

    /// Re-centre on a new mean, keeping the variance fixed.
    pub fn with_mean(mean: Genotype, variance: Vec<f64>, epsilon: f64, sigma_floor: f64) -> Result<Self, GenotypeError> {
        if variance.len() != mean.len() {
            return Err(GenotypeError::VarianceLengthMismatch {
                variance: variance.len(),
                parameters: mean.len(),
            });
        }
        for layer in mean.partition().layers() {
            let segment = &variance[layer.start..layer.start + layer.len];
            if let Some(idx) = segment.iter().position(|v| !v.is_finite() || *v < 0.0) {
                return Err(GenotypeError::NegativeVariance { index: layer.start + idx });
            }
            if segment.windows(2).any(|w| w[0].to_bits() != w[1].to_bits()) {
                return Err(GenotypeError::VarianceNotLayerConstant { layer: layer.name.clone() });
            }
        }
        Ok(SamplingDistribution { mean, variance, epsilon, sigma_floor })
    }

    pub fn mean(&self) -> &Genotype {
        &self.mean
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn sigma_floor(&self) -> f64 {
        self.sigma_floor
    }

    /// Draw one offspring: `mean + sqrt(variance) * z` elementwise with
    /// standard-normal `z` from `stream`. The stream is taken by value, so
    /// concurrent samplers never contend.
    pub fn sample(&self, mut stream: NormalStream) -> Genotype {
        let values: Vec<f64> = self
            .mean
            .values()
            .iter()
            .zip(&self.variance)
            .map(|(m, v)| m + v.sqrt() * stream.next_standard_normal())
            .collect();
        Genotype { values, partition: Arc::clone(&self.mean.partition) }
    }
}

/// Elementwise arithmetic mean of genotypes sharing one partition.
///
/// Summation runs in the given list order, parameter index ascending, so
/// the result is bitwise reproducible for a fixed input order.
pub fn average(genotypes: &[&Genotype]) -> Result<Genotype, GenotypeError> {
    let first = genotypes.first().ok_or(GenotypeError::EmptyAverage)?;
    if genotypes.iter().any(|g| g.partition != first.partition && *g.partition != *first.partition) {
        return Err(GenotypeError::PartitionMismatch);
    }
    let mut acc = vec![0.0; first.len()];
    for genotype in genotypes {
        for (slot, v) in acc.iter_mut().zip(genotype.values()) {
            *slot += v;
        }
    }
    let count = genotypes.len() as f64;
    for slot in &mut acc {
        *slot /= count;
    }
    Ok(Genotype { values: acc, partition: Arc::clone(&first.partition) })
}

#[derive(Debug, Clone, PartialEq)]
pub enum GenotypeError {
    EmptyPartition,
    ZeroLengthLayer { name: String },
    DuplicateLayerName { name: String },
    LengthMismatch { values: usize, partition: usize },
    NonFiniteValue { index: usize },
    EpsilonOutOfRange { epsilon: f64 },
    NegativeSigmaFloor { sigma_floor: f64 },
    NegativeVariance { index: usize },
    VarianceNotLayerConstant { layer: String },
    VarianceLengthMismatch { variance: usize, parameters: usize },
    EmptyAverage,
    PartitionMismatch,
}

impl fmt::Display for GenotypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenotypeError::EmptyPartition => write!(f, "layer partition has no layers"),
            GenotypeError::ZeroLengthLayer { name } => {
                write!(f, "layer '{name}' has zero length")
            }
            GenotypeError::DuplicateLayerName { name } => {
                write!(f, "duplicate layer name '{name}'")
            }
            GenotypeError::LengthMismatch { values, partition } => {
                write!(f, "{values} values do not fill a partition of {partition} parameters")
            }
            GenotypeError::NonFiniteValue { index } => {
                write!(f, "non-finite parameter value at index {index}")
            }
            GenotypeError::EpsilonOutOfRange { epsilon } => {
                write!(f, "epsilon {epsilon} outside [0, 1]")
            }
            GenotypeError::NegativeSigmaFloor { sigma_floor } => {
                write!(f, "sigma floor {sigma_floor} must be finite and non-negative")
            }
            GenotypeError::NegativeVariance { index } => {
                write!(f, "invalid variance entry at index {index}")
            }
            GenotypeError::VarianceNotLayerConstant { layer } => {
                write!(f, "variance varies within layer '{layer}'")
            }
            GenotypeError::VarianceLengthMismatch { variance, parameters } => {
                write!(f, "variance length {variance} does not match {parameters} parameters")
            }
            GenotypeError::EmptyAverage => write!(f, "cannot average an empty list of genotypes"),
            GenotypeError::PartitionMismatch => {
                write!(f, "genotypes do not share one layer partition")
            }
        }
    }
}

impl std::error::Error for GenotypeError {}
