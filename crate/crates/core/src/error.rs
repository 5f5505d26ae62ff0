use crate::geom::Frame;

/// Errors raised by the simulation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not skew-symmetric (|M + Mᵀ|∞ = {asymmetry:e})")]
    NotSkewSymmetric { asymmetry: f64 },

    #[error("non-finite value produced by {what}")]
    NonFiniteState { what: &'static str },

    #[error("non-finite value produced by {what} at tick {tick}")]
    Diverged { tick: u64, what: &'static str },

    #[error("frame mismatch: expected {expected:?}, got {found:?}")]
    FrameMismatch { expected: Frame, found: Frame },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: &'static str },

    #[error("the scripted approach never reached the wall")]
    NoContact,

    #[error("invalid scenario: {0}")]
    InvalidScenario(&'static str),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn ensure(cond: bool, field: &'static str, reason: &'static str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter { field, reason })
    }
}
