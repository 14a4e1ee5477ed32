use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("unsupported corpus format_version {0} (expected 1)")]
    UnsupportedVersion(u32),

    #[error("size mismatch for {file}: manifest declares {expected} bytes, found {actual}")]
    SizeMismatch {
        file: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("duplicate doc_id {0:?}")]
    DuplicateId(String),

    #[error("unknown doc_id {0:?}")]
    UnknownId(String),

    #[error("dimension mismatch {expected} vs {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("invalid record {doc_id:?}: {message}")]
    InvalidRecord { doc_id: String, message: String },

    #[error("{0}")]
    MissingField(String),

    #[error("empty matrix")]
    EmptyMatrix,

    #[error("document {doc_id:?}: zero-norm embedding at row {row}")]
    ZeroNorm { doc_id: String, row: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("document {doc_id:?}: {source}")]
    Document {
        doc_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("no evaluable queries")]
    NoEvaluableQueries,

    #[error("query {0:?} is not present in qrels")]
    QueryNotInQrels(String),

    #[error("method {method} at ratio {ratio}: {source}")]
    SweepCell {
        method: String,
        ratio: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_doc(self, doc_id: &str) -> Self {
        match self {
            e @ (Error::Document { .. } | Error::ZeroNorm { .. } | Error::InvalidRecord { .. }) => e,
            other => Error::Document {
                doc_id: doc_id.to_string(),
                source: Box::new(other),
            },
        }
    }
}
