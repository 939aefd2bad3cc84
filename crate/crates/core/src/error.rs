use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the MLAB1 array container.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic: expected MLAB1, found {found:?}")]
    BadMagic { found: Vec<u8> },
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("header shape {shape:?} disagrees with {what}")]
    ShapeMismatch { shape: Vec<usize>, what: String },
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("trailing bytes after payload: {extra}")]
    TrailingBytes { extra: usize },
}

impl FormatError {
    /// Stable numeric code, one per failure mode.
    pub fn code(&self) -> u32 {
        match self {
            FormatError::BadMagic { .. } => 1,
            FormatError::BadHeader(_) => 2,
            FormatError::ShapeMismatch { .. } => 3,
            FormatError::Truncated { .. } => 4,
            FormatError::TrailingBytes { .. } => 5,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("format error: {0}")]
    Format(#[from] FormatError),
    #[error("unsupported Gevrey order s = {0} (need s > 1)")]
    UnsupportedOrder(f64),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("jet oracle failed at order {order}: {reason}")]
    Jet { order: usize, reason: String },
    #[error("window truncation: {0}")]
    Truncation(String),
    #[error("xi grid spacing {spacing} is off the FFT lattice; required spacing is {required} (2*pi*h/(dy*L) for integer L)")]
    Lattice { spacing: f64, required: f64 },
    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),
    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String, last_state: Vec<f64> },
    #[error("energy drift {drift:e} exceeds {limit:e}")]
    EnergyDrift { drift: f64, limit: f64 },
    #[error("spectral aliasing: {0}")]
    Aliasing(String),
    #[error("instability: {0}")]
    Instability(String),
    #[error("saturated: all {count} norms fell below the underflow floor")]
    Saturated { count: usize },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error on {path:?}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Json(_))
    }
}
