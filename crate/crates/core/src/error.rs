use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by estimators, policies, environments and the harness.
#[derive(Debug, Error)]
pub enum BanditError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error at {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = BanditError> = std::result::Result<T, E>;

impl BanditError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BanditError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        BanditError::Csv {
            path: path.into(),
            source,
        }
    }
}

macro_rules! ensure_arg {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err($crate::error::BanditError::InvalidArgument(format!($($fmt)+)));
        }
    };
}

pub(crate) use ensure_arg;
