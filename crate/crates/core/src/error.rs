use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("angular law is not integrable: {0}")]
    NonIntegrableAngular(String),
    #[error("singular Gram matrix: the grid cannot resolve the five collision invariants")]
    SingularGram,
    #[error("vacuum state: total mass is {0}")]
    VacuumState(f64),
    #[error("saturation regime: T = {temperature} does not exceed 1.02 T_F = {threshold}")]
    SaturationRegime { temperature: f64, threshold: f64 },
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("insufficient support: {usable} usable shells, need at least 3")]
    InsufficientSupport { usable: usize },
    #[error("unsupported norm exponent p = {0}; expected 1, 2 or infinity")]
    UnsupportedNorm(f64),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("snapshot format: {0}")]
    Snapshot(String),
    #[error("config parse error: {0}")]
    ConfigParse(String),
    #[error("invalid value for `{key}`: {message}")]
    ConfigValidation { key: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
