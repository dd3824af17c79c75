use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("lattice step must lie in (0, 1], got {0}")]
    InvalidStep(f64),

    #[error("{what} = {value} is not an admissible multiple of the lattice step {step}")]
    Misaligned {
        what: &'static str,
        value: f64,
        step: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index {index} out of range for excursion of length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("time index {index} sits at lattice level {found}, expected level {expected}")]
    NotAtLevel {
        index: usize,
        expected: u32,
        found: u32,
    },

    #[error("gauge function evaluated outside (0, 1/e): r = {0}")]
    GaugeDomain(f64),

    #[error("statistic requires a non-empty sample")]
    EmptySample,

    #[error("malformed excursion: {0}")]
    Malformed(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
