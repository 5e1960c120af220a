use alloc::string::String;

/// Errors raised by the estimators and their supporting routines.
///
/// Every variant maps to a stable identifier through [`Error::code`], which
/// the command-line front end prints in its diagnostics.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFiniteValue(String),
    #[error("unknown treatment level `{0}`")]
    UnknownTreatmentLevel(String),
    #[error("treatment is degenerate: {0}")]
    DegenerateTreatment(String),
    #[error("propensity {value} at row {row} is outside (0, 1)")]
    PropensityOutOfRange { row: usize, value: f64 },
    #[error("propensities are required but were not supplied")]
    MissingPropensity,
    #[error("operation requires a binary treatment")]
    NotBinary,
    #[error("invalid treatment level {0}")]
    InvalidLevel(usize),
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("bandwidth must be positive, got {0}")]
    NonPositiveBandwidth(f64),
    #[error("matrix is rank deficient")]
    RankDeficient,
    #[error("all kernel weights are zero for anchor {0}")]
    AllWeightsZero(usize),
    #[error("invalid contrast matrix: {0}")]
    InvalidContrast(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("fold {0} is degenerate")]
    FoldDegenerate(usize),
    #[error("input is constant")]
    ConstantInput,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// Stable machine-readable identifier of the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonFiniteValue(_) => "NonFiniteValue",
            Error::UnknownTreatmentLevel(_) => "UnknownTreatmentLevel",
            Error::DegenerateTreatment(_) => "DegenerateTreatment",
            Error::PropensityOutOfRange { .. } => "PropensityOutOfRange",
            Error::MissingPropensity => "MissingPropensity",
            Error::NotBinary => "NotBinary",
            Error::InvalidLevel(_) => "InvalidLevel",
            Error::InvalidDimension(_) => "InvalidDimension",
            Error::NonPositiveBandwidth(_) => "NonPositiveBandwidth",
            Error::RankDeficient => "RankDeficient",
            Error::AllWeightsZero(_) => "AllWeightsZero",
            Error::InvalidContrast(_) => "InvalidContrast",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::FoldDegenerate(_) => "FoldDegenerate",
            Error::ConstantInput => "ConstantInput",
            Error::InvalidConfig(_) => "InvalidConfig",
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
