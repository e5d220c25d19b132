use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A named parameter failed validation.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error(
        "quadrature did not converge: achieved relative error {achieved:.3e} \
         (requested {requested:.1e}) after {panels} panels"
    )]
    Quadrature {
        achieved: f64,
        requested: f64,
        panels: usize,
    },

    /// Request exceeds a hard size limit.
    #[error("resource limit: {0}")]
    Resource(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Quadrature { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
