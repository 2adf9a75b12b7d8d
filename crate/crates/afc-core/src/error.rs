use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A numeric argument is outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value is missing, malformed or violates an invariant.
    /// `path` is the dotted key path into the run configuration.
    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },

    /// Two measured quantities contradict each other.
    #[error("inconsistent measurement: {0}")]
    InconsistentMeasurement(String),

    /// The comb parameters make a derived quantity undefined.
    #[error("degenerate comb: {0}")]
    DegenerateComb(String),

    /// A timestamp-stream file could not be decoded. `offset` is the byte
    /// offset of the first unreadable content.
    #[error("stream format error at byte {offset}: {message}")]
    StreamFormat { offset: u64, message: String },

    /// An optimizer or fit failed to converge.
    #[error("fit did not converge: {0}")]
    NonConvergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CoreError {
    pub fn domain(msg: impl Into<String>) -> Self {
        CoreError::Domain(msg.into())
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        CoreError::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
