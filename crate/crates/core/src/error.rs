use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("law file: {0}")]
    Schema(String),

    #[error("probabilities sum to {0}")]
    ProbabilitySum(String),

    #[error("law produces no children almost surely (P(Z1 = 0) = 1)")]
    AllExtinct,

    #[error("theta must be non-negative, got {0}")]
    NegativeTheta(f64),

    #[error("theta must be positive, got {0}")]
    NonPositiveTheta(f64),

    #[error("non-finite intermediate value in {0}")]
    NonFinite(&'static str),

    #[error("numerical search did not converge: {0}")]
    NoConvergence(String),

    #[error("extremal process undefined on extinction")]
    Extinct,

    #[error("snapshot was capped; results after a cap cannot be used")]
    Capped,

    #[error("enumeration needs a tabulated law with rational entries")]
    NotTabulated,

    #[error("enumeration tree has {leaves} leaves, above the limit {limit}")]
    EnumerationTooLarge { leaves: u128, limit: u128 },

    #[error("x outside interior large-deviations regime (x = {0})")]
    OutsideRegime(f64),

    #[error("law is lattice, the local limit check needs a non-lattice walk (as4)")]
    Lattice,

    #[error("A-event undecidable at this window (window {window} < epsilon * n = {needed})")]
    WindowTooSmall { window: f64, needed: f64 },

    #[error("realization was truncated at the first positive atom; rebuild it in full")]
    Truncated,

    #[error("profile requires subcritical/critical subtrees")]
    Supercritical,

    #[error("no accepted samples")]
    NoAcceptedSamples,

    #[error("acceptance rate {rate:.3e} after {attempts} attempts is below {floor:.0e}")]
    AcceptanceTooLow { rate: f64, attempts: u64, floor: f64 },

    #[error("empty sample set")]
    EmptySample,

    #[error("zero total count")]
    ZeroCount,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
