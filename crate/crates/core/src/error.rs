use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value {value} evaluating {what} at {at}")]
    NonFinite { what: &'static str, at: f64, value: f64 },

    #[error("quadrature on [{a}, {b}] did not reach tolerance {tol:e} (estimated error {err:e})")]
    QuadratureFailed { a: f64, b: f64, tol: f64, err: f64 },

    #[error("tail decision undecided: {0}")]
    Undecided(String),

    #[error("primitive I(t) = {value} <= 1 at t = {t}; decay rate undefined")]
    DomainTooSmall { t: f64, value: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("time {t} outside kernel domain (lower bound {lower})")]
    OutOfDomain { t: f64, lower: f64 },

    #[error("integral diverges: {0}")]
    Divergent(String),

    #[error("matrix not positive definite (jitter cap {cap:e} exceeded)")]
    NotPositiveDefinite { cap: f64 },

    #[error("singular observed block in conditional law")]
    Singular,

    #[error("invalid jump kernel: {}", .0.join("; "))]
    InvalidJumpKernel(Vec<String>),

    #[error("tolerance {tol:e} unreachable: {reason}")]
    ToleranceUnreachable { tol: f64, reason: String },

    #[error("no replicate stayed below the level; estimate unusable")]
    AllExceeded,

    #[error("degenerate regressor: {0}")]
    DegenerateRegressor(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("experiment `{name}`: {source}")]
    Experiment {
        name: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }
}
