use std::io;

/// Errors produced by the workbench.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An invalid constellation, code, frame or experiment setup.
    #[error("configuration error: {0}")]
    Config(String),
    /// A numeric argument outside the supported range.
    #[error("domain error: {0}")]
    Domain(String),
    /// An input with the wrong number of bits or symbols.
    #[error("framing error: {0}")]
    Framing(String),
    /// A dematcher input that cannot have come from the matcher.
    #[error("integrity error: {0}")]
    Integrity(String),
    /// A malformed LDPC address table.
    #[error("load error: {0}")]
    Load(String),
    /// Malformed or inconsistent input data (traces, sweeps, probability lists).
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the error stems from the user's setup rather than from data.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Domain(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
