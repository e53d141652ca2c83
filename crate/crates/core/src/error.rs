use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain the operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// The caller combined inputs that cannot be used together.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("scene {scene} has no {modality} modality")]
    MissingModality { scene: String, modality: char },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("emission error: {0}")]
    Emission(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}
