//! Error type shared across the toolkit.

use std::fmt;

pub type Result<T> = std::result::Result<T, VnmError>;

/// Errors produced by constructors, validators and file containers.
#[derive(Debug)]
pub enum VnmError {
    /// A value that must be finite was NaN or infinite.
    NonFinite {
        what: &'static str,
        index: usize,
    },
    /// A negative value where only nonnegative values are admitted.
    Negative {
        what: &'static str,
        index: usize,
    },
    /// Two shapes that must agree do not.
    ShapeMismatch {
        what: &'static str,
        expected: (usize, usize),
        actual: (usize, usize),
    },
    /// A sequence length that must match a computed size does not.
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    /// Matrix dims are not divisible by the pattern's V and M.
    NotDivisible {
        rows: usize,
        cols: usize,
        v: usize,
        m: usize,
    },
    /// A (V, N, M) triple outside the supported family.
    InvalidPattern(String),
    /// A sequence that must be a permutation of 0..len is not.
    InvalidPermutation(String),
    /// A mask failed structural validation where a valid mask is required.
    InvalidMask(String),
    /// Packed-format arrays are internally inconsistent.
    InvalidPacked(String),
    /// Selection found nothing meeting the speedup threshold.
    NoFeasibleCombination {
        threshold: f64,
    },
    /// Training configuration violates a documented constraint.
    InvalidConfig(String),
    /// File container: magic bytes are not "VNMT".
    BadMagic,
    /// File container: header or payload ends early.
    Truncated(&'static str),
    /// File container: unsupported version or dtype tag.
    Unsupported(String),
    /// File container: dims overflow addressable memory or disagree with payload.
    DimOverflow(String),
    /// Malformed CSV input.
    Csv(String),
    Io(std::io::Error),
}

impl fmt::Display for VnmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VnmError::NonFinite { what, index } => {
                write!(f, "non-finite value in {what} at flat index {index}")
            }
            VnmError::Negative { what, index } => {
                write!(f, "negative value in {what} at flat index {index}")
            }
            VnmError::ShapeMismatch {
                what,
                expected,
                actual,
            } => write!(
                f,
                "shape mismatch in {what}: expected {}x{}, got {}x{}",
                expected.0, expected.1, actual.0, actual.1
            ),
            VnmError::LengthMismatch {
                what,
                expected,
                actual,
            } => write!(
                f,
                "length mismatch in {what}: expected {expected}, got {actual}"
            ),
            VnmError::NotDivisible { rows, cols, v, m } => write!(
                f,
                "dims {rows}x{cols} not divisible by pattern: rows % V({v}) or cols % M({m}) != 0"
            ),
            VnmError::InvalidPattern(msg) => write!(f, "invalid V:N:M pattern: {msg}"),
            VnmError::InvalidPermutation(msg) => write!(f, "invalid permutation: {msg}"),
            VnmError::InvalidMask(msg) => write!(f, "invalid sparse mask: {msg}"),
            VnmError::InvalidPacked(msg) => write!(f, "invalid packed data: {msg}"),
            VnmError::NoFeasibleCombination { threshold } => {
                write!(
                    f,
                    "no feasible (V, M) combination at speedup threshold {threshold}"
                )
            }
            VnmError::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            VnmError::BadMagic => write!(f, "bad magic: not a VNMT container"),
            VnmError::Truncated(what) => write!(f, "truncated {what}"),
            VnmError::Unsupported(msg) => write!(f, "unsupported container field: {msg}"),
            VnmError::DimOverflow(msg) => write!(f, "dimension overflow: {msg}"),
            VnmError::Csv(msg) => write!(f, "csv parse error: {msg}"),
            VnmError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for VnmError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            VnmError::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for VnmError {
    fn from(e: std::io::Error) -> Self {
        VnmError::Io(e)
    }
}
