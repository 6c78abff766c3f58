use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input data could not be read or does not satisfy a type invariant.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A parameter lies outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Filtering removed every taxon, or fewer than two taxa remain.
    #[error("empty network: {0}")]
    EmptyNetwork(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Error raised inside one stage of the preprocessing pipeline.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, unwrapping any stage annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
