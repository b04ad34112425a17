use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("state is not normalised (squared norm {0})")]
    NotNormalized(f64),
    #[error("density matrix is not physical: {0}")]
    NotPhysical(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported dimension {0}: complete MUB sets are built for d in {{2, 3, 4, 5}}")]
    UnsupportedDimension(usize),
    #[error("least-squares problem is rank deficient: {0}")]
    RankDeficient(String),
    #[error("fringe fit failed: {0}")]
    FitFailed(String),
    #[error("missing measurement for mode pair ({0}, {1})")]
    MissingPair(usize, usize),
    #[error("measurement settings incomplete: {0}")]
    IncompleteSettings(String),
    #[error("no counts recorded")]
    ZeroCounts,
    #[error("dimension witness undefined: overlap sum is zero")]
    WitnessUndefined,
}
