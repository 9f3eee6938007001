use thiserror::Error;

pub type Result<T> = std::result::Result<T, CiseError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CiseError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is singular: eigenvalue {eigenvalue:e} is below threshold {threshold:e}")]
    SingularMatrix { eigenvalue: f64, threshold: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {0:e}")]
    NotPsd(f64),

    #[error("slice error: {0}")]
    Slice(String),

    #[error("response basis design matrix is rank deficient")]
    RankDeficientBasis,

    #[error("subspace basis is rank deficient")]
    RankDeficient,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("active set shrank to {active} variables, below target dimension {d}")]
    ActiveSetTooSmall { active: usize, d: usize },

    #[error("no tuning grid point produced a converged fit")]
    AllFitsFailed,
}

impl CiseError {
    /// Stable machine-readable tag, used in structured error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            CiseError::InvalidInput(_) => "InvalidInput",
            CiseError::SingularMatrix { .. } => "SingularMatrix",
            CiseError::NotPsd(_) => "NotPSD",
            CiseError::Slice(_) => "SliceError",
            CiseError::RankDeficientBasis => "RankDeficientBasis",
            CiseError::RankDeficient => "RankDeficient",
            CiseError::Domain(_) => "DomainError",
            CiseError::ActiveSetTooSmall { .. } => "ActiveSetTooSmall",
            CiseError::AllFitsFailed => "AllFitsFailed",
        }
    }
}
