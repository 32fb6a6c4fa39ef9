use thiserror::Error;

/// Errors raised by grid construction, spectral operators, norms and audits.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("band {band} outside the partition range 0..={levels}")]
    BandOutOfRange { band: usize, levels: usize },

    #[error("symbol is not supported in band {band}: {detail}")]
    BandMismatch { band: usize, detail: String },

    #[error("symbol under-resolved on this grid: {0}")]
    UnderResolved(String),

    #[error("finite-difference step too coarse: {0}")]
    StepTooCoarse(String),

    #[error("unknown registry entry `{0}`")]
    UnknownEntry(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
