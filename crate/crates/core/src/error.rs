use thiserror::Error;

/// Errors produced by the estimators and their numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid bounds: {0}")]
    InvalidBounds(String),

    /// The observed data lies outside every admissible realisation, so the
    /// reachability set is empty.
    #[error("observations inconsistent with the bounding set (bracket = {bracket:e})")]
    InconsistentData { bracket: f64 },

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("Riccati solution blew up at t = {t} (|K| = {norm:e})")]
    RiccatiBlowup { t: f64, norm: f64 },

    #[error("solve failure: {0}")]
    SolveFailure(String),

    #[error("problem too large for sampling: stacked dimension {dim} exceeds {max}")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("normal equations are singular")]
    SingularNormalEquations,

    #[error("forward step {step} has a singular step matrix")]
    SingularStep { step: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
