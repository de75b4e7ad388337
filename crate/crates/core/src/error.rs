use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("ragged row at line {line}: expected {expected} cells, found {found}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("missing value at row {row}, column {column:?}")]
    MissingValue { row: usize, column: String },

    #[error("all columns are degenerate (zero variance)")]
    AllColumnsDegenerate,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("too few rows: need at least {min}, got {got}")]
    TooFewRows { min: usize, got: usize },

    #[error("target has a single distinct value")]
    ConstantTarget,

    #[error("brute-force Shapley supports at most {max} features, got {got}")]
    TooManyFeatures { max: usize, got: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("vertex {0:?} has zero degree")]
    IsolatedVertex(String),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("graph has no edges")]
    NoEdges,

    #[error("graph volume is zero")]
    ZeroVolume,

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("unknown vertex {0:?}")]
    UnknownVertex(String),
}

pub type Result<T> = std::result::Result<T, Error>;
