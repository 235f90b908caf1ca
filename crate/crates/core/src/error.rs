use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes are incompatible for the requested operation.
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// A value is outside the domain of the function applied to it.
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    /// A caller broke an API contract (stale graph, non-scalar root, bad index).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A filter/window/transform specification is invalid for its input.
    #[error("invalid spec: {0}")]
    Spec(String),

    /// A configuration value is invalid or inconsistent.
    #[error("invalid config: {0}")]
    Config(String),

    /// A floating point computation produced NaN or infinity.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("integrity error in {file}: expected {expected} bytes, found {found}")]
    Integrity {
        file: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// Process exit status: 2 configuration or usage, 3 I/O or unreadable
    /// artifacts, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Integrity { .. } | Error::Version { .. } => 3,
            Error::Numerical(_) => 4,
            Error::Shape { .. }
            | Error::Domain { .. }
            | Error::Contract(_)
            | Error::Spec(_)
            | Error::Config(_)
            | Error::Json { .. } => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Shape {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }
}
