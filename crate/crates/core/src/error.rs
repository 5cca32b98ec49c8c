use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("segment outside the Hough quadrant: {0}")]
    OutOfQuadrant(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("point lies on the singular line of the parameterization: {0}")]
    Singular(String),

    #[error("vanishing point outside the supported regime: {0}")]
    Regime(String),

    #[error("map contains no usable values: {0}")]
    InvalidMap(String),

    #[error("image carries no line structure: {0}")]
    NoStructure(String),

    #[error("target does not fit the output grid: {0}")]
    UnrepresentableTarget(String),

    #[error("training diverged at step {step}: {detail}")]
    Divergence { step: usize, detail: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}
