use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A binary file whose header or body does not match the expected layout.
    #[error("{}: bad `{field}`: {message}", path.display())]
    Format {
        path: PathBuf,
        field: &'static str,
        message: String,
    },

    /// A malformed line in one of the text formats (TSV, TREC).
    #[error("{origin}:{line}: {message}")]
    Parse {
        origin: String,
        line: usize,
        message: String,
    },

    #[error("invalid docid {0:?}: must be non-empty and contain no whitespace")]
    InvalidDocId(String),

    #[error("duplicate docid {0:?}")]
    DuplicateDocId(String),

    #[error("unknown docid {0:?}")]
    UnknownDocId(String),

    #[error("internal docid {id} out of range (n_docs = {n_docs})")]
    DocOutOfRange { id: u32, n_docs: usize },

    #[error("similarity source returned unknown docid {neighbour} for doc {doc}")]
    UnknownNeighbour { doc: u32, neighbour: u32 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    EmptyInput(String),

    #[error("scoring failed for query {qid:?} on batch [{}]: {message}", batch.join(", "))]
    Scoring {
        qid: String,
        batch: Vec<String>,
        message: String,
    },

    #[error("no cached score for query {qid:?}, doc {docid:?}")]
    MissingScore { qid: String, docid: String },

    #[error("no vector for doc {0:?}")]
    MissingVector(String),

    #[error("vector dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(origin: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            origin: origin.into(),
            line,
            message: message.into(),
        }
    }
}
