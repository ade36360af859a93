use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no hyperedges")]
    NoHyperedges,

    #[error("invalid hypergraph: {0}")]
    InvalidHypergraph(String),

    #[error("vertex {0} has zero degree")]
    ZeroDegree(usize),

    #[error("k = {k} must be smaller than the number of subjects N = {n}")]
    KTooLarge { k: usize, n: usize },

    #[error("modality blocks disagree on subject count: expected {expected}, found {found}")]
    VertexCountMismatch { expected: usize, found: usize },

    #[error("ratio {0} outside [0, 0.5]")]
    RatioOutOfRange(f64),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("flow collapsed at iteration {iter} in channel {channel}")]
    FlowCollapse { iter: usize, channel: usize },

    #[error("class {0} has no labeled vertex")]
    MissingClassLabel(usize),

    #[error("class {0} has no subjects")]
    EmptyClass(usize),

    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("empty labeled set")]
    EmptyLabeledSet,

    #[error("empty input")]
    EmptyInput,

    #[error("all search candidates diverged")]
    AllDiverged,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("{path}:{line}:{column}: non-numeric cell {cell:?}")]
    NonNumeric {
        path: PathBuf,
        line: u64,
        column: usize,
        cell: String,
    },

    #[error("{0}: no data rows")]
    NoDataRows(PathBuf),

    #[error("row count mismatch: {first} has {first_rows} rows but {second} has {second_rows}")]
    RowCountMismatch {
        first: PathBuf,
        first_rows: usize,
        second: PathBuf,
        second_rows: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
