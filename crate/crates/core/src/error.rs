use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("spatial signature has zero norm")]
    ZeroSignature,

    #[error("beampattern is identically zero over the grid")]
    ZeroBeampattern,

    #[error("matrix is not Hermitian (relative asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("trace {actual} does not match total power {expected}")]
    PowerMismatch { expected: f64, actual: f64 },

    #[error("angle set: {0}")]
    InvalidAngles(String),

    #[error("missing snapshot for cell ({0}, {1})")]
    MissingCell(usize, usize),

    #[error("step {step}: {source}")]
    AtStep { step: usize, source: Box<Error> },

    #[error("run {run}: {source}")]
    AtRun { run: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
