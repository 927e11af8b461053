use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("truncation tail {tail:.3e} exceeds tolerance {tol:.3e}")]
    TailTooLarge { tail: f64, tol: f64 },

    #[error("basis of size {basis_size} too small: dropped mass {dropped:.3e} exceeds {tol:.3e}")]
    BasisTooSmall {
        basis_size: usize,
        dropped: f64,
        tol: f64,
    },

    #[error("sampling grid does not cover the signal support: {0}")]
    GridTooNarrow(String),

    #[error("region has no finite measure: {0}")]
    NonFiniteMeasure(String),

    #[error("quadrature order {order} too low: {reason}")]
    OrderTooLow { order: usize, reason: String },

    #[error("function is identically zero")]
    ZeroFunction,

    #[error("exponent p = {0} outside the admissible range")]
    BadExponent(f64),

    #[error("matrix is not in SL(2,R): det = {0}")]
    NotSymplectic(f64),

    #[error("eigensolver residual {residual:.3e} above tolerance {tol:.3e}")]
    EigenResidual { residual: f64, tol: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
