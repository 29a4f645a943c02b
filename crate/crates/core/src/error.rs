use thiserror::Error;

/// Errors reported by mesh construction, compilation, and search routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not unitary: defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    NotUnitary { defect: f64, tol: f64 },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error(
        "exhaustive search over {n}!^2 port pairings exceeds the cap (n <= {cap}); \
         raise the cap or switch to the sweep strategy"
    )]
    SearchSpaceTooLarge { n: usize, cap: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
