use thiserror::Error;

/// Errors raised by the solver and its subroutines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("row index {index} out of range for {rows} rows")]
    RowOutOfRange { index: usize, rows: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Domain(String),

    #[error("point is not strictly interior: slack of row {row} is {slack}")]
    InfeasibleInterior { row: usize, slack: f64 },

    #[error("rank deficient matrix: {0}")]
    RankDeficient(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("|v[{index}]| = {value} exceeds the declared bound {bound}")]
    BoundViolated { index: usize, value: f64, bound: f64 },

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unknown {kind} `{name}`")]
    UnknownStrategy { kind: &'static str, name: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
