use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-binary entry {value} at position {index} (hamming similarity needs 0/1 vectors)")]
    NonBinary { index: usize, value: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("non-finite value at position {0}")]
    NonFinite(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("missing shape tag (corruption `{0}` needs image layout)")]
    MissingShape(&'static str),

    #[error("unknown index {index} (table holds {len} entries)")]
    UnknownIndex { index: usize, len: usize },

    #[error("query has no dataset index; external embedding tables cannot embed arbitrary vectors")]
    MissingIndex,

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported {what}: {value}")]
    Unsupported { what: &'static str, value: u32 },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),

    #[error("dimension overflow in header")]
    DimensionOverflow,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
