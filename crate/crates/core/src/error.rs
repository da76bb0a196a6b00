use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid `{field}`: {reason}")]
    Validation { field: &'static str, reason: String },

    #[error("singular configuration: {0}")]
    Singular(String),

    #[error("state diverged (non-finite value) at step {step}")]
    Divergence { step: usize },

    #[error("grid mismatch: expected {expected} points, got {got}")]
    GridMismatch { expected: usize, got: usize },

    #[error("result has no space-time snapshots; rerun with a snapshot stride")]
    MissingSnapshots,

    #[error("window [{t1}, {t2}] lies outside the simulated horizon [0, {t_max}]")]
    WindowOutsideHorizon { t1: f64, t2: f64, t_max: f64 },

    #[error("output energy too small to measure ({ratio:.3e} of input)")]
    VanishingOutput { ratio: f64 },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("grid point outside the transparency regime: b = {b}, delta = {delta} (metric {metric:.3})")]
    RegimeViolation { b: f64, delta: f64, metric: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("every simulation in the search failed: {0}")]
    AllFailed(String),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            field,
            reason: reason.into(),
        }
    }
}

/// Rejects non-finite or non-positive values.
pub(crate) fn require_positive(field: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::invalid(field, format!("must be finite and > 0, got {value}")))
    }
}

pub(crate) fn require_non_negative(field: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::invalid(field, format!("must be finite and >= 0, got {value}")))
    }
}
