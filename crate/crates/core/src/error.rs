use std::path::PathBuf;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid pattern spec: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{file}: format error at byte {offset}: {msg}")]
    Format {
        file: String,
        offset: u64,
        msg: String,
    },

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("cannot calibrate noise: {0}")]
    Calibration(String),

    #[error("degenerate metric: {0}")]
    Degenerate(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("unsupported {what} version {found} (expected {expected})")]
    Version {
        what: &'static str,
        found: u32,
        expected: u32,
    },

    #[error("missing checkpoint {path}; train it first with `{command}`")]
    MissingCheckpoint { path: PathBuf, command: String },

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
