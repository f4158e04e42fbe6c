use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("non-finite value at (row {row}, col {col})")]
    NonFinite { row: usize, col: usize },

    #[error("zero variance element {0:?}")]
    ZeroVariance(String),

    #[error("duplicate element identifier {0:?}")]
    DuplicateElement(String),

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("non-positive price at (element {element:?}, t {t})")]
    NonPositivePrice { element: String, t: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid synthetic spec: {0}")]
    InvalidSynthSpec(String),

    #[error("invalid sector map: {0}")]
    InvalidSectorMap(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("degenerate resample: {0}")]
    DegenerateResample(String),

    #[error("replica {replica}: {reason}")]
    Replica { replica: usize, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("partition mismatch: {0}")]
    PartitionMismatch(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Tags errors with the pipeline stage that produced them.
pub trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
