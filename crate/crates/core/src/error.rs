use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: expected header `id,text,label`, found `{found}`")]
    BadHeader { path: PathBuf, found: String },

    #[error("{path}: row {row}: {message}")]
    MalformedRow {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("{path}: row {row}: label `{value}` is not 0 or 1")]
    InvalidLabel {
        path: PathBuf,
        row: usize,
        value: String,
    },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("embedding file line {line}: expected {expected} values, found {found}")]
    EmbeddingDimension {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("embedding file line {line}: cannot parse `{token}` as a number")]
    EmbeddingParse { line: usize, token: String },

    #[error("insufficient minority samples: need at least 2, found {found}")]
    InsufficientMinority { found: usize },

    #[error("labels contain a single class; both classes are required")]
    SingleClass,

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    #[error("non-finite loss during training ({detail})")]
    NonFiniteLoss { detail: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid model artifact: {0}")]
    Artifact(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("report parse error: {0}")]
    Report(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
