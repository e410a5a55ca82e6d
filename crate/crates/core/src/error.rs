use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Configuration values that can never describe a runnable setup.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// An index (antenna element, subcarrier, grid cell) outside its domain.
    #[error("index out of range: {0}")]
    Index(String),
    /// Mathematically invalid input, e.g. a non-positive range.
    #[error("domain error: {0}")]
    Domain(String),
    /// Matrix/vector dimensions that do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// Scene not identifiable: too many sources for the aperture or snapshots.
    #[error("identifiability violated: {0}")]
    Identifiability(String),
    /// Numeric breakdown (NaN/Inf input, failed decomposition).
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serial(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
