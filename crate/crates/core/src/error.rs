use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("accumulator has no observations")]
    EmptyAccumulator,

    #[error("invalid observation {value}: must be finite")]
    InvalidObservation { value: f64 },

    #[error("loss {index} is not finite ({value})")]
    NonFiniteLoss { index: usize, value: f64 },

    #[error("loss {index} is negative ({value})")]
    NegativeLoss { index: usize, value: f64 },

    #[error("loss {index} must be strictly positive, got {value}")]
    NonPositiveLoss { index: usize, value: f64 },

    #[error("{what}: expected length {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{what} must not be empty")]
    Empty { what: &'static str },

    #[error("weight {index} must be strictly positive, got {value}")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("gradient norm of loss {index} is zero")]
    ZeroGradientNorm { index: usize },

    #[error("gradient is not finite at coordinate {index}")]
    NonFiniteGradient { index: usize },

    #[error("invalid {name}: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },

    #[error("strategy `{strategy}` needs per-loss gradients, which the problem does not provide")]
    GradientsRequired { strategy: &'static str },

    #[error("problem `{problem}` cannot be evaluated at coarser scales")]
    UnsupportedBase { problem: &'static str },

    #[error("pixel {index} is outside [0, 1]: {value}")]
    PixelOutOfRange { index: usize, value: f64 },

    #[error("unknown sweep axis `{0}`")]
    UnknownAxis(String),

    #[error("value `{value}` is not valid for sweep axis `{axis}`")]
    InvalidAxisValue { axis: &'static str, value: String },
}
