use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("matrix entry at ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("cmx parse error: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },
    #[error("eigenbasis condition estimate {condition:e} exceeds the diagonalizability limit")]
    NonDiagonalizable { condition: f64 },
    #[error("truncation at t={t} cuts through a degenerate pair (relative gap {gap:e})")]
    DegenerateCut { t: usize, gap: f64 },
    #[error("degenerate spectrum: entries {i} and {j} have relative gap {gap:e}")]
    DegenerateSpectrum { i: usize, j: usize, gap: f64 },
    #[error("shifted system for column {column} is numerically singular in the complement")]
    NearSingularShift { column: usize },
    #[error("gauge pivot of eigenvector {column} vanishes")]
    ZeroPivot { column: usize },
    #[error("kept singular value {index} is zero")]
    ZeroSingularValue { index: usize },
}

impl Error {
    /// Short stable name, used in reports and diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::InvalidDimensions(_) => "InvalidDimensions",
            Error::NonFinite { .. } => "NonFinite",
            Error::Parse(_) => "Parse",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Precondition(_) => "Precondition",
            Error::Singular => "Singular",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::NonDiagonalizable { .. } => "NonDiagonalizable",
            Error::DegenerateCut { .. } => "DegenerateCut",
            Error::DegenerateSpectrum { .. } => "DegenerateSpectrum",
            Error::NearSingularShift { .. } => "NearSingularShift",
            Error::ZeroPivot { .. } => "ZeroPivot",
            Error::ZeroSingularValue { .. } => "ZeroSingularValue",
        }
    }

    /// True for failures caused by the numerical content of the input rather
    /// than by malformed input or usage.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular
                | Error::NoConvergence { .. }
                | Error::NonDiagonalizable { .. }
                | Error::DegenerateCut { .. }
                | Error::DegenerateSpectrum { .. }
                | Error::NearSingularShift { .. }
                | Error::ZeroPivot { .. }
                | Error::ZeroSingularValue { .. }
        )
    }
}
