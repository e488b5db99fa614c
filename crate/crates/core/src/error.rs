use thiserror::Error;

/// Every failure the toolkit can report.
///
/// The string returned by [`Error::category`] is part of the public contract:
/// the CLI prints it and run directories record it, so the spellings are stable.
#[derive(Debug, Error)]
pub enum Error {
    #[error("state norm {norm:e} exceeded blow-up bound {bound:e} at t = {time}")]
    StateDivergence { time: f64, norm: f64, bound: f64 },

    #[error("dynamics returned a non-finite value: {0}")]
    NonFiniteDynamics(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("rank deficient system: min/max singular value {ratio:e} below {tolerance:e}")]
    RankDeficient { ratio: f64, tolerance: f64 },

    #[error("inadmissible policy: {0}")]
    InadmissiblePolicy(String),

    #[error("interval {index} contains no dense samples")]
    EmptyInterval { index: usize },

    #[error(
        "persistent excitation violated: eigenvalue ratio {ratio:e} below threshold {threshold:e}"
    )]
    PEViolation { ratio: f64, threshold: f64 },

    #[error("basis schedule exhausted; best residual_rms {best_residual:e} (threshold {threshold:e})")]
    ScheduleExhausted {
        best_residual: f64,
        threshold: f64,
    },

    #[error("inverse of gain function requested at {value:e}, outside its range [0, {range_max:e}]")]
    CompositionDomain { value: f64, range_max: f64 },

    #[error("configuration error: {0}")]
    ConfigParse(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("replay of {0} did not reproduce the recorded outputs")]
    ReplayMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn category(&self) -> &'static str {
        match self {
            Error::StateDivergence { .. } => "StateDivergence",
            Error::NonFiniteDynamics(_) => "NonFiniteDynamics",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::InadmissiblePolicy(_) => "InadmissiblePolicy",
            Error::EmptyInterval { .. } => "EmptyInterval",
            Error::PEViolation { .. } => "PEViolation",
            Error::ScheduleExhausted { .. } => "ScheduleExhausted",
            Error::CompositionDomain { .. } => "CompositionDomain",
            Error::ConfigParse(_) => "ConfigParse",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::ReplayMismatch(_) => "ReplayMismatch",
            Error::Io(_) => "Io",
        }
    }

    /// Process exit code used by the CLI for this category.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConfigParse(_) | Error::InvalidArgument(_) => 2,
            Error::Io(_) => 3,
            Error::StateDivergence { .. } | Error::NonFiniteDynamics(_) => 4,
            Error::PEViolation { .. } => 5,
            Error::RankDeficient { .. } | Error::DimensionMismatch { .. } => 6,
            Error::InadmissiblePolicy(_) => 7,
            Error::EmptyInterval { .. } => 8,
            Error::ScheduleExhausted { .. } => 9,
            Error::CompositionDomain { .. } => 10,
            Error::ReplayMismatch(_) => 11,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
