use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("model needs at least one component")]
    EmptyModel,
    #[error("Hurst index {0} is outside (0, 1)")]
    HurstOutOfRange(f64),
    #[error("duplicate Hurst index {0}; components must have distinct indices")]
    DuplicateHurst(f64),
    #[error("{hursts} Hurst indices but {weights} weights")]
    LengthMismatch { hursts: usize, weights: usize },
    #[error("weight {0} is not strictly positive")]
    NonPositiveWeight(f64),
    #[error("variance requested at negative time {0}")]
    NegativeTime(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("drain exponent beta={beta} must exceed alpha_inf={alpha_inf} for a finite storage process")]
    InfeasibleDrain { beta: f64, alpha_inf: f64 },
    #[error("optimizer failed to bracket a maximum: {0}")]
    Optimizer(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("missing Pickands input: {0}")]
    MissingPickandsInput(&'static str),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("circulant embedding has negative eigenvalue {min} (largest {max})")]
    NegativeSpectrum { min: f64, max: f64 },
    #[error("dense factorization of size {n} exceeds the cap {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error("increment covariance is not positive semi-definite (pivot {pivot} at step {step})")]
    NotPositiveSemiDefinite { pivot: f64, step: usize },
    #[error("path of length {len} is too short; {needed} grid points are required")]
    PathTooShort { len: usize, needed: usize },
    #[error("exponent clipped {clips} times; estimate is invalid")]
    ExponentOverflow { clips: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
