use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed graph document: {0}")]
    MalformedDocument(String),
    #[error("graph contains a cycle through node {0}")]
    CyclicGraph(u64),
    #[error("node {node} references missing input {missing}")]
    DanglingReference { node: u64, missing: u64 },
    #[error("bad shape on node {node}: {reason}")]
    BadShape { node: u64, reason: String },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("underspecified node {node}: {reason}")]
    Underspecified { node: u64, reason: String },
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("graph has no operator nodes")]
    EmptyGraph,
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("need at least 3 records to split, got {0}")]
    TooFew(usize),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("actual value of target `{target}` is zero at record {index}")]
    ZeroActual { target: &'static str, index: usize },
    #[error("i/o failure: {0}")]
    IoFailure(String),
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("vocabulary version mismatch: file has `{found}`, this build uses `{expected}`")]
    VersionMismatch { found: String, expected: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::IoFailure(err.to_string())
    }
}
