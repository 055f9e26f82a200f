use thiserror::Error;

/// Errors raised by the inference engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A trace coordinate was NaN or infinite.
    #[error("non-finite coordinate {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    /// The potential energy is undefined at the queried position.
    #[error("position lies outside the domain of the potential energy")]
    OutOfDomain,

    /// The position cannot be brought back into the support by extension,
    /// because the program failed on a prefix that is already fixed.
    #[error("position cannot be extended into the support")]
    Unextendable,

    /// A gradient or energy evaluated to a non-finite number.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// The extend loop appended more coordinates than allowed.
    #[error("extend appended more than {cap} coordinates")]
    ExtendBudgetExceeded { cap: usize },

    /// A boundary oracle returned a hit time outside `(0, T]`.
    #[error("boundary oracle returned t_hit = {t_hit} outside (0, {limit}]")]
    OracleContractViolation { t_hit: f64, limit: f64 },

    /// Two histograms did not share a support.
    #[error("mismatched supports: {0}")]
    MismatchedSupport(String),

    /// Invalid configuration or experiment specification.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }
}
