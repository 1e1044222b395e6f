use num_bigint::BigUint;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// A composite cofactor resisted splitting within the configured effort.
    #[error("incomplete factorization of {n}: cofactor {cofactor} could not be split")]
    IncompleteFactorization { n: BigUint, cofactor: BigUint },

    #[error("map undefined at point: {0}")]
    UndefinedAtPoint(String),

    #[error("point ({x}, {y}) does not lie on {model}")]
    NotOnCurve { model: String, x: String, y: String },

    #[error("model mismatch: {0}")]
    ModelMismatch(String),

    #[error("precision failure: {0}")]
    Precision(String),

    #[error("malformed record at line {line}: {msg}")]
    MalformedLine { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
