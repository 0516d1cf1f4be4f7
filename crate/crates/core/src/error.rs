use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the operation's domain (negative time, empty
    /// sample set, zero subdivision, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A model or data description is internally inconsistent.
    #[error("validation error: {0}")]
    Validation(String),

    /// The subcriticality condition `ρ = α·m_{b,1}·‖φ‖₁ < 1` fails.
    #[error("stability violated: rho = {rho} >= 1")]
    StabilityViolated { rho: f64 },

    /// Runaway path: the event count exceeded the configured cap.
    #[error("explosion guard: {events} events by t = {time} (cap {cap}); intensity {lambda} at stop")]
    Explosion {
        events: u64,
        time: f64,
        cap: u64,
        lambda: f64,
    },

    /// The operation requires a path with a full candidate log.
    #[error("unsupported path: {0}")]
    UnsupportedPath(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
