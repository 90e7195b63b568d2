use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid evidence: {0}")]
    InvalidEvidence(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("trajectory does not cover the required interval: {0}")]
    Coverage(String),

    #[error("signal phase error: {0}")]
    Phase(String),

    #[error("infeasible scene: {0}")]
    InfeasibleScene(String),

    #[error("division guard: {0}")]
    DivisionGuard(String),

    #[error("training data error in demonstration {demo}: {source}")]
    TrainingData {
        demo: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("ingestion error in {}: {message}", path.display())]
    Ingestion { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn ingestion(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Ingestion {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad input data or configuration rather than I/O.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Ingestion { .. } | Error::Io(_) | Error::Json(_) | Error::Csv(_)
        )
    }
}
