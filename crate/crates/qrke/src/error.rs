//! Crate-wide error type with the exit-code families the CLI maps to.

use thiserror::Error;

/// Diagnostic codes for wire-envelope rejection. Each decode failure mode
/// carries its own code so tests and operators can tell them apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeCode {
    Oversize,
    BadVersion,
    BadNumber,
    UnknownType,
    DuplicateKey,
    UnknownKey,
    MissingKey,
    BadField,
    Truncated,
}

impl DecodeCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DecodeCode::Oversize => "oversize",
            DecodeCode::BadVersion => "bad-version",
            DecodeCode::BadNumber => "bad-number",
            DecodeCode::UnknownType => "unknown-type",
            DecodeCode::DuplicateKey => "duplicate-key",
            DecodeCode::UnknownKey => "unknown-key",
            DecodeCode::MissingKey => "missing-key",
            DecodeCode::BadField => "bad-field",
            DecodeCode::Truncated => "truncated",
        }
    }
}

impl std::fmt::Display for DecodeCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed decimal string or suite descriptor.
    #[error("parse error: {0}")]
    Parse(String),

    /// Argument outside a mathematical domain (|x| > 1 for arccos, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Intermediate value too close to -1, 0, or 1; caller re-picks x.
    #[error("degenerate value: {0}")]
    Degenerate(String),

    /// Guard digits or widening insufficient for the requested precision.
    #[error("precision error: {0}")]
    Precision(String),

    /// Invalid configuration or parameters (M < N, unreachable floor, ...).
    #[error("parameter error: {0}")]
    Parameter(String),

    /// State-machine or peer violation of the handshake.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// Wire envelope rejected with a diagnostic code.
    #[error("decode error ({code}): {detail}")]
    Decode { code: DecodeCode, detail: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// CLI exit-code family: config=2, protocol=3, precision=4, io=5.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Parameter(_) => 2,
            Error::Domain(_) | Error::Degenerate(_) | Error::Protocol(_) | Error::Decode { .. } => 3,
            Error::Precision(_) => 4,
            Error::Io(_) => 5,
        }
    }

    pub(crate) fn decode(code: DecodeCode, detail: impl Into<String>) -> Self {
        Error::Decode { code, detail: detail.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
