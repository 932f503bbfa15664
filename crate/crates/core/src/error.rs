use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("empty input")]
    Empty,

    #[error("non-finite value encountered")]
    NonFinite,

    #[error("degenerate direction: vector norm is zero")]
    DegenerateDirection,

    #[error("input is off the {manifold} by {deviation:e}")]
    OffManifold {
        manifold: &'static str,
        deviation: f64,
    },

    #[error("not a rotation matrix (orthogonality error {ortho:e}, det {det})")]
    InvalidRotation { ortho: f64, det: f64 },

    #[error("elevation {elevation} is inside the gimbal-lock region")]
    GimbalLock { elevation: f64 },

    #[error("angle {name}={value} is outside its range")]
    AngleOutOfRange { name: &'static str, value: f64 },

    #[error("fixed-sign component {index} violates its sign constraint (value {value})")]
    FixedSignViolation { index: usize, value: f64 },

    #[error("sign class {class} out of range (0..{classes})")]
    ClassOutOfRange { class: usize, classes: usize },

    #[error("non-positive probability at index {index}")]
    NonPositive { index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("backward called before forward")]
    BackwardBeforeForward,

    #[error("non-finite gradient produced by the {head} head")]
    NonFiniteGradient { head: &'static str },

    #[error("loss became NaN at epoch {epoch}, batch {batch}")]
    NanLoss { epoch: usize, batch: usize },
}
