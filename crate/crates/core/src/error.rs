use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("noise channel {channel} violates B(t)^2 = gamma(t)^2 I: deviation {deviation:.3e} at t = {time}")]
    NoiseViolation { channel: usize, deviation: f64, time: f64 },

    #[error("time {t} lies outside the schedule domain [0, {end}]")]
    OutOfDomain { t: f64, end: f64 },

    #[error("{channels} noise channels but {increments} Wiener increments")]
    ChannelCountMismatch { channels: usize, increments: usize },

    #[error("the expectation-state oracle needs raw Euler-Maruyama states")]
    RequiresRawStates,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
