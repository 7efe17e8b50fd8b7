use thiserror::Error;

/// Errors raised by the aggregation and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A derivative was requested at the origin, where only the unit-ball
    /// subdifferential exists.
    #[error("derivative requested at the zero vector")]
    ZeroVector,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    /// The evaluation point coincides with a voter's reported vector.
    #[error("evaluation point coincides with a voter point")]
    AtVoterPoint,

    #[error("profile contains no voters")]
    EmptyProfile,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The profile spans an affine subspace of dimension < 2.
    #[error("profile is degenerate (affine dimension {0} < 2)")]
    DegenerateDimension(usize),

    #[error("{strategic} strategic voters do not form a strict minority against {truthful} truthful voters")]
    MajorityAttack { truthful: usize, strategic: usize },

    #[error("root not bracketed: {0}")]
    BracketFailure(String),

    #[error("solver stopped at gradient norm {grad_norm:e} after {iterations} iterations")]
    NotConverged { grad_norm: f64, iterations: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
