use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("invalid block shape m={m}, n={n}: both must be at least 1")]
    InvalidShape { m: usize, n: usize },

    #[error("matrix has scale {scale}, which exceeds the requested scale {delta}")]
    InfeasibleScale { scale: u64, delta: u64 },

    #[error("integer overflow in matrix arithmetic")]
    Overflow,

    #[error("entry ({row}, {col}) would become negative")]
    Underflow { row: usize, col: usize },

    #[error("index {index} out of range for {size} ports")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("column {col} is assigned to more than one row")]
    DuplicateColumn { col: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("frame {frame}: {message}")]
    Verification { frame: u64, message: String },
}
