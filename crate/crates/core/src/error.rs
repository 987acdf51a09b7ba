use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state is not normalized (norm^2 = {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("gate is not unitary (max deviation {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("invalid qubit selection: {0}")]
    InvalidQubits(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("system of {n} qubits exceeds the dense diagonalization cap of {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("projection probability {prob:e} is below the compressibility threshold")]
    NotCompressible { prob: f64 },

    #[error("non-finite value in cycle {cycle}, epoch {epoch}, parameter {param:?}")]
    NonFinite { cycle: usize, epoch: usize, param: Option<usize> },

    #[error("bundle error: {0}")]
    Bundle(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
