use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid Lorentz transform: {0}")]
    InvalidTransform(String),

    #[error("packet support reaches the grid margin: {0}")]
    SupportViolation(String),

    #[error("transformed support escapes the grid: {0}")]
    SupportEscape(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("factorization failed: {0}")]
    FactorizationFailure(String),

    #[error("surface fold-over: {0}")]
    FoldOver(String),

    #[error("masks overlap: {0}")]
    Overlap(String),

    #[error("masks do not cover the surface: {0}")]
    NotAPartition(String),

    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("determinacy sets differ: {0}")]
    DeterminacyMismatch(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("backend limit: {0}")]
    BackendLimit(String),

    #[error("malformed container: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
