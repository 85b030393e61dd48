use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{malformed} of {total} corpus records are malformed")]
    MostlyMalformed { malformed: usize, total: usize },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("speech {id} dated {date} lies outside the window span {start}..={end}")]
    DateOutOfSpan {
        id: String,
        date: chrono::NaiveDate,
        start: chrono::NaiveDate,
        end: chrono::NaiveDate,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate window {window_id}: no documents with non-zero weight remain after filtering")]
    DegenerateWindow { window_id: usize },

    #[error("k = {k} outside the admissible range 1..={bound} for a {rows}x{cols} matrix")]
    InvalidRank {
        k: usize,
        bound: usize,
        rows: usize,
        cols: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("singular value decomposition failed: {0}")]
    Svd(String),

    #[error("factorization produced non-finite values at iteration {iteration}")]
    NumericalBlowup { iteration: usize },

    #[error("empty vocabulary: no term reaches the minimum count of {min_count}")]
    EmptyVocabulary { min_count: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("subject {code} has an empty document after tokenization")]
    EmptySubject { code: String },

    #[error("invalid planted spec: {0}")]
    InvalidPlantedSpec(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl ToString, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_string(),
            line,
            message: message.into(),
        }
    }
}
