use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("invalid architecture: {0}")]
    Architecture(String),

    #[error("invalid layer indices: {0}")]
    Index(String),

    #[error("parameter {index} = {value} lies outside [-1, 1]")]
    OutOfRange { index: usize, value: f64 },

    #[error("sparsity budget {budget} exceeded ({nonzeros} nonzeros)")]
    Sparsity { budget: usize, nonzeros: usize },

    #[error("inversion did not converge (residual {residual:.3e})")]
    Inversion { residual: f64 },

    #[error("regularity violation: {0}")]
    Regularity(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("perturbed family is invalid: {0}")]
    FamilyInvalid(String),

    #[error("packing is empty: {0}")]
    EmptyPacking(String),

    #[error("training failed at epoch {epoch}: {reason}")]
    Training { epoch: usize, reason: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape { expected, got })
    }
}
