//! Crate-wide error type.

/// Errors produced by model construction, evaluation, and simulation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite input in {context}")]
    NonFinite { context: &'static str },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("task jacobian is singular (min singular value {sigma_min:.3e} of the weighted Gram matrix)")]
    SingularTask { sigma_min: f64 },

    #[error("stacked task rows exceed degrees of freedom ({rows} rows > {dofs} dofs)")]
    RankOverflow { rows: usize, dofs: usize },

    #[error("integration failed at t = {time:.6} s: {what}")]
    Integration { time: f64, what: String },

    #[error("identification failed: {0}")]
    Identification(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}

/// Returns a `NonFinite` error unless every entry of `values` is finite.
pub fn ensure_finite<'a>(
    context: &'static str,
    values: impl IntoIterator<Item = &'a f64>,
) -> Result<()> {
    for v in values {
        if !v.is_finite() {
            return Err(Error::NonFinite { context });
        }
    }
    Ok(())
}
