use thiserror::Error;

#[derive(Debug, Error)]
pub enum LpcaError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("matrix entry at ({row}, {col}) is {value}, expected 0 or 1")]
    NotBinary { row: usize, col: usize, value: f64 },
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("loading matrix is not orthonormal: ||U^T U - I||_F = {residual}")]
    NotOrthonormal { residual: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}
