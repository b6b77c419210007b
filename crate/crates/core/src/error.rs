use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("empty neighbor list")]
    EmptyNeighbors,

    #[error("requested {requested} neighbors but pool has {available}")]
    NotEnoughNeighbors { requested: usize, available: usize },

    #[error("feature kind mismatch: {0}")]
    KindMismatch(String),

    #[error("schema has no size column (required by {0})")]
    MissingSizeColumn(&'static str),

    #[error("degenerate analogy size (must be > 0)")]
    DegenerateSize,

    #[error("empty training matrix")]
    EmptyMatrix,

    #[error("degenerate split (one side empty)")]
    DegenerateSplit,

    #[error("input vector has {got} values, tree expects {expected}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
