use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("group elements of different kinds cannot be combined")]
    VariantMismatch,

    #[error("Haar probability sampling is undefined for the non-compact group {0}")]
    NonCompactGroup(String),

    #[error("operation not supported for group family {0}")]
    UnsupportedFamily(String),

    #[error("orbit selector is degenerate at the zero vector")]
    ZeroVector,

    #[error("maximal invariant {kind} is not available for group {family}")]
    UnsupportedKind { kind: String, family: String },

    #[error("matrix is not a valid rotation: {0}")]
    InvalidRotation(String),

    #[error("permutation is not a bijection: {0:?}")]
    InvalidPermutation(Vec<usize>),

    #[error("all points are identical; median pairwise distance is zero")]
    AllPointsIdentical,

    #[error("sample too small: need at least {needed}, got {got}")]
    SampleTooSmall { needed: usize, got: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("landmark count {landmarks} must lie in 1..={n}")]
    BadLandmarkCount { landmarks: usize, n: usize },

    #[error("Monte Carlo budget must be at least 1, got {0}")]
    BadMonteCarloBudget(usize),

    #[error("number of random projections must be at least 1")]
    BadProjectionCount,

    #[error("regularized matrix is not positive definite; increase epsilon")]
    SingularSolve,

    #[error("density sum underflowed even in log space")]
    DegenerateDensity,

    #[error("design matrix is rank deficient")]
    RankDeficientDesign,

    #[error("too few values: need at least {needed}, got {got}")]
    TooFewValues { needed: usize, got: usize },

    #[error("bad parameters: {0}")]
    BadParameters(String),

    #[error("cannot parse descriptor {input:?}: {reason}")]
    InvalidDescriptor { input: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
