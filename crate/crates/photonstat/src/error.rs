//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Unrecognized magic bytes or unsupported format version.
    #[error("format error: {0}")]
    Format(String),

    /// Structurally invalid payload (unsorted tags, bad channel, count mismatch).
    #[error("corrupt stream: {0}")]
    Corrupt(String),

    /// A timestamp outside the shot it belongs to.
    #[error("range error: {0}")]
    Range(String),

    /// Inconsistent or unusable configuration (windows, bin widths, schemas).
    #[error("config error: {0}")]
    Config(String),

    /// Input values outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Problem size exceeds a hard limit (e.g. Liouville-space dimension).
    #[error("size error: {0}")]
    Size(String),

    /// Discretization too coarse for the requested dynamics.
    #[error("accuracy error: {0}")]
    Accuracy(String),

    /// Frequency bands cannot be separated (demodulation/spectra).
    #[error("separability error: {0}")]
    Separability(String),

    /// No usable signal component (e.g. zero beat amplitude).
    #[error("no-signal error: {0}")]
    NoSignal(String),

    /// Series defined on incompatible grids.
    #[error("alignment error: {0}")]
    Alignment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 usage, 3 data, 4 accuracy/separability.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) | Error::Size(_) | Error::Alignment(_) => 2,
            Error::Format(_) | Error::Corrupt(_) | Error::Range(_) | Error::Io(_) => 3,
            Error::Accuracy(_) | Error::Separability(_) | Error::NoSignal(_) => 4,
        }
    }
}
