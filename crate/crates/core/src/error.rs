use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = DamError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DamError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("exact arithmetic would overflow: p·(N+1)^n = {patterns}·({neurons}+1)^{order} exceeds the 128-bit accumulator")]
    Overflow {
        order: u32,
        neurons: usize,
        patterns: usize,
    },

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("entry {value} at position {position} is not a spin (expected -1 or +1)")]
    InvalidSpin { position: usize, value: i64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("malformed pattern file header: {0}")]
    MalformedHeader(String),

    #[error("invalid pattern entry {token:?} (row {row}, column {column})")]
    InvalidEntry {
        row: usize,
        column: usize,
        token: String,
    },

    #[error("truncated pattern payload: expected {expected} entries, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
