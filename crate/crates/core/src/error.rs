use thiserror::Error;

pub type Result<T, E = TangleError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum TangleError {
    #[error("parameter {value} outside [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },

    #[error("parameter {0} is a knot; second derivatives are undefined there")]
    KnotPoint(f64),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("seed tangents must be unit length and orthogonal")]
    InvalidSeed,

    #[error("degenerate chain: {0}")]
    DegenerateChain(String),

    #[error("coordinate {index} lies on the cut locus (antipodal pair)")]
    CutLocus { index: usize },

    #[error("non-finite value encountered during integration at t = {t}")]
    NonFinite { t: f64 },

    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown {kind} '{name}' (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
