//! Error type shared across the crate, with a stable mapping to process
//! exit codes for the command line tool.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or matrix shapes that cannot be combined.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Invalid configuration (hyperparameters, flags, file naming).
    #[error("config error: {0}")]
    Config(String),

    /// Malformed or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),

    #[error("data error: line {line}: {msg}")]
    MalformedLine { line: usize, msg: String },

    /// Feature dimension of a sample does not match what the model expects.
    #[error("feature dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("sequence {id:?} has no frames")]
    EmptySequence { id: String },

    #[error("training loss became non-finite at epoch {epoch}")]
    Diverged { epoch: usize },

    /// Checkpoint file does not start with the expected magic bytes.
    #[error("not a checkpoint file: bad magic")]
    BadMagic,

    #[error("unsupported checkpoint version {found} (supported: {supported})")]
    BadVersion { found: u32, supported: u32 },

    #[error("checkpoint payload truncated: expected {expected} bytes, got {actual}")]
    Truncated { expected: u64, actual: u64 },

    #[error("checkpoint header: {0}")]
    Header(String),

    /// A gradient or self-test check failed.
    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error("numerical oracle error: {0}")]
    Oracle(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Exit code contract: 0 success, 1 failed check, 2 bad config,
    /// 3 bad data, 4 numerical divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_)
            | Error::MalformedLine { .. }
            | Error::DimMismatch { .. }
            | Error::EmptySequence { .. }
            | Error::BadMagic
            | Error::BadVersion { .. }
            | Error::Truncated { .. }
            | Error::Header(_)
            | Error::Io { .. } => 3,
            Error::Diverged { .. } => 4,
            Error::CheckFailed(_) => 1,
            Error::Shape(_) | Error::Oracle(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_contract() {
        assert_eq!(Error::config("x").exit_code(), 2);
        assert_eq!(Error::data("x").exit_code(), 3);
        assert_eq!(Error::DimMismatch { expected: 4, actual: 7 }.exit_code(), 3);
        assert_eq!(Error::Diverged { epoch: 3 }.exit_code(), 4);
        assert_eq!(Error::CheckFailed("grad".into()).exit_code(), 1);
        assert_eq!(Error::BadMagic.exit_code(), 3);
    }

    #[test]
    fn dim_mismatch_message_names_both_sizes() {
        let msg = Error::DimMismatch { expected: 63, actual: 10 }.to_string();
        assert!(msg.contains("63") && msg.contains("10"));
    }
}
