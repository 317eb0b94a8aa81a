use num_complex::Complex64;
use thiserror::Error;

/// Errors shared by every module of the toolkit.
///
/// `Usage` covers violated preconditions (caller bugs), `Domain` covers
/// evaluation outside the mathematical domain (branch cuts, poles).  The
/// remaining variants are runtime failures of specific algorithms.
#[derive(Debug, Error)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parallel transport failed near z = {position}: {reason}")]
    Transport { position: Complex64, reason: String },

    #[error("not convertible: {0}")]
    NotConvertible(String),

    #[error("series window overflow: {0}")]
    Window(String),

    #[error("degeneration failure while lifting at eps order {eps_order}, u order {u_order} (residual {residual:.3e})")]
    Degeneration {
        eps_order: usize,
        u_order: usize,
        residual: f64,
    },

    #[error("linear algebra backend: {0}")]
    Linalg(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
