use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible tensor shapes; `op` names the primitive that rejected them.
    #[error("dimension mismatch in {op}: {detail}")]
    Dim { op: &'static str, detail: String },

    /// A NaN or infinity was produced or supplied where finite values are required.
    #[error("non-finite value in {op}")]
    NonFinite { op: &'static str },

    /// A caller broke an API precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// An object or attribute id / name outside the vocabulary.
    #[error("vocabulary error: {0}")]
    Vocab(String),

    /// A malformed input file; reports the offending line.
    #[error("{path}:{line}: {msg}")]
    Format {
        path: String,
        line: usize,
        msg: String,
    },

    /// An invalid configuration value.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The evaluation protocol cannot run on the given inputs.
    #[error("evaluation protocol: {0}")]
    Protocol(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dim {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn format(path: &std::path::Path, line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.display().to_string(),
            line,
            msg: msg.into(),
        }
    }
}
