use std::path::PathBuf;

/// Errors produced anywhere in the scoring pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A file did not parse under its format. `offset` is the byte position
    /// at which decoding gave up.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("pooling weights sum to zero")]
    DegenerateWeights,

    #[error("non-finite objective at log2 exposure {x}: {message}")]
    Numerical { x: f64, message: String },

    #[error("unsupported metric: {0}")]
    UnsupportedMetric(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("logistic fit failed (best residual {best_residual})")]
    FitFailure { best_residual: f64 },
}

impl Error {
    pub(crate) fn format(offset: u64, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }

    /// Process exit code used by the command-line front end.
    ///
    /// 2: argument errors, 3: format and I/O errors, 4: numerical errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Format { .. } | Error::Io { .. } => 3,
            Error::Numerical { .. }
            | Error::DegenerateInput(_)
            | Error::DegenerateWeights
            | Error::UndefinedCorrelation(_)
            | Error::FitFailure { .. } => 4,
            Error::InvalidArgument(_)
            | Error::DimensionMismatch { .. }
            | Error::UnsupportedMetric(_) => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
