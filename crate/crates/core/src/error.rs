use thiserror::Error;

/// Errors raised by the environment, the optimizers and their file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value in {context}: {detail}")]
    NonFinite { context: &'static str, detail: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("profile: {0}")]
    Profile(#[from] toml::de::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
