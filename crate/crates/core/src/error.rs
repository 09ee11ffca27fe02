use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter or configuration value violates a stated inequality.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// The adaptive mesh law failed to keep the gradient coefficients below
    /// the diffusion ratio. Indicates a defect, not a user error.
    #[error("mesh law violated at row {row}: alpha = {alpha:e} > lambda_n = {lambda:e}")]
    MeshLawViolated { row: usize, alpha: f64, lambda: f64 },

    #[error("zero pivot in tridiagonal elimination at row {0}")]
    ZeroPivot(usize),

    #[error("time step {tau:e} fell below the floor {floor:e}")]
    ResolutionExhausted { tau: f64, floor: f64 },

    #[error("invariant violated at step {step}: {what}")]
    InvariantViolation { step: usize, what: String },

    #[error("no blow-up detected: {0}")]
    NoBlowup(String),

    #[error("fit window holds {got} records, need at least {need}")]
    FitWindowTooSmall { got: usize, need: usize },

    #[error("growth hypothesis unmet: {0}")]
    GrowthHypothesis(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that indicate a broken run invariant rather than bad
    /// input. The binary maps these to exit code 2.
    pub fn is_runtime_defect(&self) -> bool {
        matches!(
            self,
            Error::MeshLawViolated { .. } | Error::ZeroPivot(_) | Error::InvariantViolation { .. }
        )
    }
}
