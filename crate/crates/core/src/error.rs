use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("alpha = {value} must lie in (1/2, 1), at least 1e-9 away from either end")]
    Alpha { value: f64 },

    #[error("epsilon = {value} must lie in (0, alpha*(1-alpha)) = (0, {upper}), at least 1e-9 away from either end")]
    Epsilon { value: f64, upper: f64 },

    #[error("horizon = {0} must be at least 2")]
    Horizon(u64),

    #[error("trace has {got} steps but at least {needed} are required")]
    TraceTooShort { needed: usize, got: usize },

    #[error("traces must share parameters: found {first:?} and {other:?}")]
    MixedParams {
        first: (f64, f64),
        other: (f64, f64),
    },

    #[error("no traces supplied")]
    EmptyInput,

    #[error("enumeration length n = {0} outside the supported range 2..=10")]
    EnumerationRange(usize),

    #[error("oracle depth must be at least 1")]
    Depth,

    #[error("starting likelihood {0} must be finite and nonzero")]
    StartingLikelihood(f64),

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input values rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Csv(_) | Error::Json(_))
    }
}
