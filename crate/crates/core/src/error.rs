use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A device whose channel is exactly zero where the solver needs to invert it.
    #[error("degenerate channel for device {device}{}", state.map(|s| format!(" in state {s}")).unwrap_or_default())]
    DegenerateChannel { device: usize, state: Option<usize> },

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The per-state Lagrangian has no minimizer: a device with zero dual
    /// price would need unbounded power.
    #[error("inner problem unbounded in state {state}: device {device} has zero dual price")]
    UnboundedInner { state: usize, device: usize },

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
