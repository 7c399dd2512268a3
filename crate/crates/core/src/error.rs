use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("time {t} is outside the model horizon [{start}, {end}]")]
    OutsideHorizon { t: f64, start: f64, end: f64 },

    #[error("non-finite value at t = {t} in state {state}")]
    NonFinite { t: f64, state: String },

    #[error("non-finite disability reserve at onset index {k}, time index {n}")]
    NonFiniteSurface { k: usize, n: usize },

    #[error("spouse age {age} is negative on the horizon for quadrature node {node}")]
    NegativeSpouseAge { node: usize, age: f64 },

    #[error("transition probability {value} at t = {t} left [0, 1] beyond tolerance; reduce the step")]
    ProbabilityOutOfRange { t: f64, value: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("configuration rejected: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite { .. } | Error::NonFiniteSurface { .. } | Error::ProbabilityOutOfRange { .. })
    }
}
