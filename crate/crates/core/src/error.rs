use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular point at the origin; use radial quadrature instead of a point evaluation")]
    SingularPoint,

    #[error("tail exponent required to decide convergence of a radial-table measure")]
    TailExponentRequired,

    #[error("J undefined: admissibility condition fails for k = {order}")]
    NotAdmissible { order: u32 },

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("reality violated: {0}")]
    RealityViolated(String),

    #[error("integrand is not adapted: step {step} depends on {depends_on} noise slices")]
    NotAdapted { step: usize, depends_on: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("compactly supported Green kernel required: operator order k = {0} has infinite propagation speed")]
    CompactSupportRequired(u32),

    #[error("nonlinearity does not vanish at zero; select the weighted solver")]
    WeightedSolverRequired,

    #[error("config error in {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
