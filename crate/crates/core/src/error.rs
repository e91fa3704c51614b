use thiserror::Error;

/// Divergence threshold on any state magnitude.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite input `{0}`")]
    NonFinite(&'static str),

    #[error("state diverged at t = {time} (|state| = {magnitude:e})")]
    Diverged { time: f64, magnitude: f64 },

    #[error("argument {value} collides with root {root} (log singularity)")]
    RootCollision { value: f64, root: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("not enough usable points for a fit: {found} found, {needed} needed")]
    InsufficientData { found: usize, needed: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn finite(value: f64, name: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(name))
    }
}

pub(crate) fn positive(value: f64, name: &'static str) -> Result<f64> {
    finite(value, name)?;
    if value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {value}")))
    }
}

pub(crate) fn nonnegative(value: f64, name: &'static str) -> Result<f64> {
    finite(value, name)?;
    if value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be nonnegative, got {value}")))
    }
}

pub(crate) fn guard(time: f64, state: &[f64]) -> Result<()> {
    for &v in state {
        if !v.is_finite() || v.abs() > DIVERGENCE_LIMIT {
            return Err(Error::Diverged { time, magnitude: v.abs() });
        }
    }
    Ok(())
}
