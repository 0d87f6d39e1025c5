//! Error types shared across the toolkit.

use thiserror::Error;

/// All fallible operations in this crate return [`Error`].
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The payload does not fit into the cover.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// A file or in-memory structure is malformed.
    #[error("format error: {0}")]
    Format(String),

    /// A text side-information file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// A preprocessed host value cannot be re-digitized (signals tampering).
    #[error("corruption error: {0}")]
    Corruption(String),

    /// No zero-count histogram bin exists to the right of the peak.
    #[error("no-valley error: {0}")]
    NoValley(String),

    /// A shifted host value left the admissible [-99, 99] range.
    #[error("range error: {0}")]
    Range(String),

    /// The noise bound exceeds the decoding margin; extraction is not guaranteed.
    #[error("unsupported channel: {0}")]
    UnsupportedChannel(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
