use thiserror::Error;

/// Errors surfaced by the lab. Each variant maps onto one CLI exit code.
#[derive(Debug, Error)]
pub enum Error {
    /// A value outside its documented domain (zero lattice size, empty trace, ...).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Inconsistent or unknown configuration (unknown variant, bad partition, bad spec file).
    #[error("configuration error: {0}")]
    Config(String),

    /// The host could not provide the requested memory.
    #[error("could not allocate {bytes} bytes: {reason}")]
    Resource { bytes: usize, reason: String },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code used by the benchmark CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) | Error::Config(_) => 2,
            Error::Resource { .. } => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
