use thiserror::Error;

/// Errors raised by the simulators, estimators and experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("Hurst index must lie in (0, 1), got {0}")]
    InvalidHurst(f64),

    #[error("{0}")]
    HurstTooSmall(String),

    #[error("circulant embedding has eigenvalue {value} at index {index} below -{tolerance}")]
    NegativeEigenvalue {
        index: usize,
        value: f64,
        tolerance: f64,
    },

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("Hölder exponent must lie in (0, H={hurst}), got {alpha}")]
    InvalidExponent { alpha: f64, hurst: f64 },

    #[error("unknown drift model `{0}` (expected linear, cubic, linear_plus_sine or constant)")]
    UnknownModel(String),

    #[error("unknown kernel `{0}` (expected biweight or triweight)")]
    UnknownKernel(String),

    #[error("unknown test function `{0}` (expected one, identity, square, quartic or cos)")]
    UnknownTestFunction(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("observation-rate exponent gamma must exceed 1, got {0}")]
    InvalidGamma(f64),

    #[error("simulated state became non-finite at fine step {step}")]
    NonFiniteState { step: usize },

    #[error("operation needs the fine-grid trajectory, but the path only carries observations")]
    MissingFineGrid,

    #[error("no evaluation point has kernel mass above the threshold")]
    EmptyCurve,

    #[error("invalid experiment plan: {0}")]
    PlanInvalid(String),

    #[error("report has no rows")]
    EmptyReport,

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, used in CLI error payloads.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidHurst(_) | Error::HurstTooSmall(_) => "InvalidHurst",
            Error::NegativeEigenvalue { .. } => "NegativeEigenvalue",
            Error::NotPositiveDefinite => "NotPositiveDefinite",
            Error::InvalidExponent { .. } => "InvalidExponent",
            Error::UnknownModel(_) => "UnknownModel",
            Error::UnknownKernel(_) => "UnknownKernel",
            Error::UnknownTestFunction(_) => "UnknownTestFunction",
            Error::InvalidParams(_) => "InvalidParams",
            Error::InvalidGamma(_) => "InvalidGamma",
            Error::NonFiniteState { .. } => "NonFiniteState",
            Error::MissingFineGrid => "MissingFineGrid",
            Error::EmptyCurve => "EmptyCurve",
            Error::PlanInvalid(_) => "PlanInvalid",
            Error::EmptyReport => "EmptyReport",
            Error::Parse(_) => "Parse",
            Error::Io(_) => "IoError",
            Error::Json(_) => "IoError",
        }
    }

    /// Whether the error stems from bad user input rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Json(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
