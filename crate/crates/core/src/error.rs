use std::fmt;

use thiserror::Error;

/// Which end of a link a coder belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Transmit,
    Receive,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Transmit => f.write_str("transmit"),
            Side::Receive => f.write_str("receive"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("on-switch subsystem is singular (pivot ratio {ratio:.3e})")]
    SingularNetwork { ratio: f64 },

    #[error("coder radiates no field (pattern norm {norm:.3e})")]
    ZeroPattern { norm: f64 },

    #[error("{side} coder {index} radiates no field")]
    ZeroPatternAt { side: Side, index: usize },

    #[error("invalid synthesis spec: {0}")]
    InvalidSpec(String),

    #[error("parse error at line {line}: {field}: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("model failed validation: {0}")]
    ValidationFailed(crate::antenna_model::ValidationReport),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("exhaustive search over {q} bits exceeds the {max}-bit limit")]
    TooLarge { q: usize, max: usize },

    #[error("no feasible coder: every candidate radiates nothing")]
    InfeasibleAll,

    #[error("partition {0} is empty")]
    EmptyPartition(usize),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("all eigenvalues are zero")]
    AllZeroEigenvalues,

    #[error("open-circuit pattern matrix is identically zero")]
    DegenerateModel,

    #[error("model load failed ({path}): {source}")]
    ModelLoad {
        path: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(line: usize, field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad inputs (configs, files, flags) rather
    /// than by a failure while running.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch(_)
                | Error::InvalidSpec(_)
                | Error::Parse { .. }
                | Error::ValidationFailed(_)
                | Error::InvalidConfig(_)
                | Error::TooLarge { .. }
                | Error::ModelLoad { .. }
        )
    }
}
