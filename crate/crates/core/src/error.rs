use thiserror::Error;

/// Errors raised by the estimation toolkit.
///
/// Variant names are stable: the CLI prints them verbatim when an estimator
/// fails, and the Monte Carlo harness records them as failure reasons.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive definite (pivot {pivot} failed after jitter {jitter:e})")]
    NotPositiveDefinite { pivot: usize, jitter: f64 },

    #[error("matrix is not symmetric (max relative asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("nugget may only be added to a self-correlation matrix")]
    NuggetOnCrossMatrix,

    #[error("mean design is singular or not of full column rank")]
    SingularMeanDesign,

    #[error("optimizer found no finite objective value")]
    OptimFailed,

    #[error("hyperparameter grid is empty (n = {0})")]
    EmptyGrid(usize),

    #[error("clip bounds inverted: lo = {lo}, hi = {hi}")]
    BoundsInverted { lo: f64, hi: f64 },

    #[error("duplicate spline knots at index {0}")]
    DuplicateKnots(usize),

    #[error("hat matrix trace equals n for every smoothing parameter")]
    DegenerateHat,

    #[error("rank deficient system: {0}")]
    RankDeficient(String),

    #[error("bad fold count K = {k} for n = {n}")]
    BadFoldCount { n: usize, k: usize },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("grid layout requires a perfect square, got n = {0}")]
    NotPerfectSquare(usize),

    #[error("every replication failed")]
    AllFailed,

    #[error("bootstrap failed: {failed} of {total} replicates errored")]
    BootstrapFailed { failed: usize, total: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Short variant name, used as a stable failure label.
    pub fn name(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::NotSymmetric(_) => "NotSymmetric",
            Error::DomainError(_) => "DomainError",
            Error::NuggetOnCrossMatrix => "NuggetOnCrossMatrix",
            Error::SingularMeanDesign => "SingularMeanDesign",
            Error::OptimFailed => "OptimFailed",
            Error::EmptyGrid(_) => "EmptyGrid",
            Error::BoundsInverted { .. } => "BoundsInverted",
            Error::DuplicateKnots(_) => "DuplicateKnots",
            Error::DegenerateHat => "DegenerateHat",
            Error::RankDeficient(_) => "RankDeficient",
            Error::BadFoldCount { .. } => "BadFoldCount",
            Error::EmptyInput(_) => "EmptyInput",
            Error::NotPerfectSquare(_) => "NotPerfectSquare",
            Error::AllFailed => "AllFailed",
            Error::BootstrapFailed { .. } => "BootstrapFailed",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::DimensionMismatch(msg.into()))
}
