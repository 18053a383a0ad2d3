use std::path::PathBuf;

/// Errors raised anywhere in the forecasting toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Two operands disagree on shape.
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    /// A caller-supplied argument is outside the operation's domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// An object was used in a state that does not permit the operation.
    #[error("invalid state: {0}")]
    State(String),

    /// Input data is malformed or incomplete.
    #[error("data error: {0}")]
    Data(String),

    /// A numerical routine could not produce a finite answer.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Wind direction is undefined for a zero wind vector.
    #[error("calm wind: direction undefined for vx = vy = 0")]
    CalmWind,

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn dim(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Dimension {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl Error {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::Argument(_) => "argument",
            Error::State(_) => "state",
            Error::Data(_) => "data",
            Error::Numeric(_) => "numeric",
            Error::CalmWind => "calm",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
