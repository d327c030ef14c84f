use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported genus {0}: closed surfaces here need genus >= 2")]
    UnsupportedGenus(usize),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("chart error on face {face}: {msg}")]
    Chart { face: usize, msg: String },

    #[error("generator relation violated: residual {residual:.3e} exceeds {tol:.1e}")]
    RelationMismatch { residual: f64, tol: f64 },

    #[error("generator {name} is not unitary (residual {residual:.3e})")]
    NotUnitary { name: String, residual: f64 },

    #[error("invalid cocycle: {0}")]
    InvalidCocycle(String),

    #[error("rank mismatch: expected {expected}, got {got}")]
    RankMismatch { expected: usize, got: usize },

    #[error("type mismatch: {0}")]
    TypeMismatch(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("dense size {size} exceeds cap {cap}")]
    DenseCapExceeded { size: usize, cap: usize },

    #[error("{0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
