use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("instance too large: {what} is {actual}, limit {limit}")]
    TooLarge {
        what: &'static str,
        actual: usize,
        limit: usize,
    },

    #[error("distance oracle is not a pseudo-metric: {0}")]
    NotAMetric(String),

    #[error("integrability failure: {0}")]
    Integrability(String),

    #[error("negative value {value} at outcome {outcome}")]
    NegativeValue { outcome: usize, value: f64 },

    #[error("empty localized set: {0}")]
    EmptyLocalizedSet(String),

    #[error("invalid bracket: h({lo}) = {h_lo}, h({hi}) = {h_hi}")]
    InvalidBracket { lo: f64, hi: f64, h_lo: f64, h_hi: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
