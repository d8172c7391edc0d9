use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("dimension {k} outside the supported range {min}..={max}")]
    DimensionRange { k: usize, min: usize, max: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("shape matrix must have V[0][0] = 1, found {found}")]
    ShapeNormalization { found: f64 },

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument {value} outside the open interval (0, 1)")]
    OutOfUnitInterval { value: f64 },

    #[error("observation {index} coincides with the center")]
    ZeroDistance { index: usize },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error("radial moment of order {order} is infinite for {model}")]
    InfiniteMoment { order: u32, model: String },

    #[error("score dimension {score} does not match data dimension {data}")]
    ScoreDimension { score: usize, data: usize },

    #[error("sample size {n} too large for enumeration (maximum {max})")]
    TooLarge { n: usize, max: usize },

    #[error("missing table cells: {}", .0.join(", "))]
    MissingCells(Vec<String>),

    #[error("parse error: {0}")]
    Parse(String),
}
