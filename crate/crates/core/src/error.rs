use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The quantity only exists in the recurrent regime `theta < 1`.
    #[error("regime error: theta = {theta} (requires 0 < theta < 1)")]
    Regime { theta: f64 },

    /// A partition violates the block invariants.
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    /// A linear solve or numerical routine failed.
    #[error("numerical failure: {message} (condition estimate {condition:e})")]
    Numerical { message: String, condition: f64 },

    /// A statistical fit had too few usable points.
    #[error("fit degenerate: {0}")]
    FitDegenerate(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Short machine-readable tag, used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Regime { .. } => "regime",
            Error::InvalidPartition(_) => "invalid_partition",
            Error::Numerical { .. } => "numerical",
            Error::FitDegenerate(_) => "fit_degenerate",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}
