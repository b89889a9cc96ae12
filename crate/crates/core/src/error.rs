use crate::group::GroupId;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Compute,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("allocation requests {requested} instances of group {group} but only {available} are available")]
    AllocationExceedsAvailable {
        group: GroupId,
        requested: usize,
        available: usize,
    },
    #[error("group {0} is in the allocation but not in the generator spec")]
    UnknownGroupInAllocation(GroupId),
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),
    #[error("no convergence after {max_iter} iterations (last max change {residual:e})")]
    NonConvergence {
        max_iter: usize,
        last_iterate: Vec<f64>,
        residual: f64,
    },
    #[error("model has no intercept for group {0}")]
    UnknownGroupIntercept(GroupId),
    #[error("evaluation group {0} has no instances")]
    EmptyEvaluationGroup(GroupId),
    #[error("AUROC undefined: {0}")]
    SingleClassUndefined(String),
    #[error("surface has no axis along group {0}")]
    AxisNotFound(GroupId),
    #[error("reference allocation {0} is not a valid grid point for group {1}")]
    ReferenceNotInGrid(String, GroupId),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("tf-idf vocabulary is empty after filtering")]
    EmptyVocabulary,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidConfig(_) | Error::UnknownGroupInAllocation(_) => ErrorClass::Config,
            Error::AllocationExceedsAvailable { .. }
            | Error::SchemaMismatch(_)
            | Error::Parse { .. }
            | Error::EmptyVocabulary
            | Error::DimensionMismatch { .. }
            | Error::InvalidDataset(_)
            | Error::EmptyEvaluationGroup(_)
            | Error::AxisNotFound(_)
            | Error::ReferenceNotInGrid(..)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => ErrorClass::Data,
            Error::DegenerateDesign(_)
            | Error::NonConvergence { .. }
            | Error::UnknownGroupIntercept(_)
            | Error::SingleClassUndefined(_) => ErrorClass::Compute,
        }
    }

    /// Short machine-readable tag for error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::AllocationExceedsAvailable { .. } => "AllocationExceedsAvailable",
            Error::UnknownGroupInAllocation(_) => "UnknownGroupInAllocation",
            Error::DegenerateDesign(_) => "DegenerateDesign",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::UnknownGroupIntercept(_) => "UnknownGroupIntercept",
            Error::EmptyEvaluationGroup(_) => "EmptyEvaluationGroup",
            Error::SingleClassUndefined(_) => "SingleClassUndefined",
            Error::AxisNotFound(_) => "AxisNotFound",
            Error::ReferenceNotInGrid(..) => "ReferenceNotInGrid",
            Error::SchemaMismatch(_) => "SchemaMismatch",
            Error::Parse { .. } => "ParseError",
            Error::EmptyVocabulary => "EmptyVocabulary",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InvalidDataset(_) => "InvalidDataset",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Io(_) => "Io",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
        }
    }
}
