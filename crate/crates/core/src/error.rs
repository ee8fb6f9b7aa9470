use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Both components of a requested pair vanish; the trajectory contributes exactly zero.
    #[error("zero-weight insertion")]
    ZeroWeightInsertion,

    #[error("operator is not hermitian (max |M - M†| = {max_dev:e})")]
    NotHermitian { max_dev: f64 },

    #[error("negative decay rate {rate} in channel {channel}")]
    NegativeRate { channel: usize, rate: f64 },

    #[error("time {t} is outside the tabulated coefficient range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("numerical blow-up during integration at t = {t}")]
    BlowUp { t: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Every channel has zero jump weight at a sampled jump time.
    #[error("dark state at jump time t = {t}")]
    DarkState { t: f64 },

    #[error("at least 2 samples are required, got {n}")]
    InsufficientSamples { n: usize },

    #[error("correlation spec is not time ordered: {0}")]
    UnorderedSpec(String),

    #[error("method {method} does not support this correlation spec: {reason}")]
    MethodMismatch { method: String, reason: String },

    #[error("grid is not uniform starting at zero")]
    NonUniformGrid,

    #[error("steady state did not converge (residual {residual:e})")]
    NoConvergence { residual: f64 },

    #[error("trajectory {stream}: {source}")]
    Trajectory {
        stream: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
