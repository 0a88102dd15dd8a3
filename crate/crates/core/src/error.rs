use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// The requested computation lies outside the hypotheses under which it is meaningful.
    #[error("regime violation ({hypothesis}): {detail}")]
    Regime { hypothesis: String, detail: String },

    #[error("weight does not change sign: {0}")]
    SignChange(String),

    /// Radial projection onto a level set of the weighted q-mass is undefined.
    #[error("projection undefined: {0}")]
    ProjectionUndefined(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("degenerate domain: {0}")]
    Degenerate(String),

    #[error("initialization failure: {0}")]
    Initialization(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn regime(hypothesis: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Regime {
            hypothesis: hypothesis.into(),
            detail: detail.into(),
        }
    }

    /// True for errors that stem from the configuration or from a violated
    /// hypothesis (as opposed to I/O or numerical failure).
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Regime { .. }
                | Error::SignChange(_)
                | Error::Json(_)
                | Error::GridMismatch(_)
                | Error::Domain(_)
                | Error::Degenerate(_)
        )
    }
}
