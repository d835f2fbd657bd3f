use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("unknown vertex label {0}")]
    UnknownLabel(usize),

    #[error("duplicate vertex label {0}")]
    DuplicateLabel(usize),

    #[error("vertex label {0} is not active in the register")]
    NotActive(usize),

    #[error("assignment has {got} bits, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("resource cap exceeded: {0}")]
    Resource(String),

    #[error("dimension mismatch: state has {got} amplitudes, hamiltonian has {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("sample {0} is not a solution of the instance")]
    InvalidSample(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by configured size caps rather than bad input.
    pub fn is_resource(&self) -> bool {
        matches!(self, Error::Resource(_))
    }
}
