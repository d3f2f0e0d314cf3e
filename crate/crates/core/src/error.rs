use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },

    #[error("node id {id} out of range for graph with {n} nodes")]
    NodeOutOfRange { id: usize, n: usize },

    #[error("train-induced subgraph has no edges")]
    NoTrainEdges,

    #[error("forget target missing: {0}")]
    TargetMissing(String),

    #[error("matrix is not positive definite (pivot {pivot} = {value})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("value {0} is outside the exact accumulator range")]
    AccumulatorRange(f64),

    #[error("model is not eligible for K-hop unlearning: {0}")]
    NotLocalityEligible(String),

    #[error("model kinds differ: {0}")]
    KindMismatch(String),

    #[error("membership sets must be non-empty")]
    DegenerateSets,

    #[error("ROC-AUC is undefined when only one class is present")]
    SingleClassAuc,

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("train/val/test masks overlap at node {0}")]
    MaskOverlap(usize),

    #[error("routing requires an explicit override: {0}")]
    OverrideRequired(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("model file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures raised by the numerical core rather than by input validation.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. } | Error::AccumulatorRange(_)
        )
    }

    /// Stable variant name for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::WidthMismatch { .. } => "WidthMismatch",
            Error::NodeOutOfRange { .. } => "NodeOutOfRange",
            Error::NoTrainEdges => "NoTrainEdges",
            Error::TargetMissing(_) => "TargetMissing",
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::AccumulatorRange(_) => "AccumulatorRange",
            Error::NotLocalityEligible(_) => "NotLocalityEligible",
            Error::KindMismatch(_) => "KindMismatch",
            Error::DegenerateSets => "DegenerateSets",
            Error::SingleClassAuc => "SingleClassAuc",
            Error::MissingFile(_) => "MissingFile",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::MaskOverlap(_) => "MaskOverlap",
            Error::OverrideRequired(_) => "OverrideRequired",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Parse(_) => "Parse",
            Error::Format(_) => "Format",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}
