use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error)]
pub enum GwiError {
    #[error("offspring mean {mean} is not 1 (|m - 1| > {tolerance:e})")]
    CriticalityViolation { mean: f64, tolerance: f64 },

    #[error("degenerate law: {0}")]
    DegenerateLaw(String),

    #[error("offspring support has gcd {gcd} > 1")]
    PeriodicSupport { gcd: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("series coefficient magnitude {magnitude:e} exceeds {limit:e}")]
    TruncationOverflow { magnitude: f64, limit: f64 },

    #[error("coefficient {index} = {value:e} is below the round-off floor")]
    NegativeCoefficient { index: usize, value: f64 },

    #[error("survival probability {0:e} is too small to condition on")]
    ZeroSurvival(f64),

    #[error("quadrature did not reach tolerance after {evaluations} evaluations (estimate {estimate:e}, error {error:e})")]
    QuadratureFailure {
        evaluations: usize,
        estimate: f64,
        error: f64,
    },

    #[error("sequence did not converge: {0}")]
    NonConvergent(String),

    #[error("a model is required: {0}")]
    ModelRequired(String),

    #[error("outside the scope of the limit theorems: {0}")]
    OutOfScope(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GwiError {
    /// Stable name printed by the CLI.
    pub fn name(&self) -> &'static str {
        match self {
            GwiError::CriticalityViolation { .. } => "CriticalityViolation",
            GwiError::DegenerateLaw(_) => "DegenerateLaw",
            GwiError::PeriodicSupport { .. } => "PeriodicSupport",
            GwiError::InvalidDistribution(_) => "InvalidDistribution",
            GwiError::TruncationOverflow { .. } => "TruncationOverflow",
            GwiError::NegativeCoefficient { .. } => "NegativeCoefficient",
            GwiError::ZeroSurvival(_) => "ZeroSurvival",
            GwiError::QuadratureFailure { .. } => "QuadratureFailure",
            GwiError::NonConvergent(_) => "NonConvergent",
            GwiError::ModelRequired(_) => "ModelRequired",
            GwiError::OutOfScope(_) => "OutOfScope",
            GwiError::InvalidInput(_) => "InvalidInput",
            GwiError::Config(_) => "ConfigError",
            GwiError::Io(_) => "IoError",
        }
    }

    /// Whether the error stems from reading or parsing user configuration.
    pub fn is_config_error(&self) -> bool {
        matches!(self, GwiError::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, GwiError>;
