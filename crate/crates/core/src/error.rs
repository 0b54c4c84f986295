use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The file does not follow the header + payload layout.
    #[error("format error: {0}")]
    Format(String),

    /// Shapes, lengths or values disagree with what the header promises.
    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("token id {id} is outside the vocabulary (size {vocab_size})")]
    Vocabulary { id: usize, vocab_size: usize },

    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("non-finite gradient in layer {layer}")]
    NonFiniteGradient { layer: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("data error: {0}")]
    Data(String),

    /// A row-addressed problem in a delimited input file.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("label error: {0}")]
    Label(String),

    #[error("template error: {0}")]
    Template(String),

    #[error("metric {metric} is undefined for group {group} (zero denominator)")]
    UndefinedMetric { group: String, metric: String },

    #[error("attribute error: {0}")]
    Attribute(String),

    #[error("statistics error: {0}")]
    Statistics(String),

    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error("sweep error: {0}")]
    Sweep(String),

    #[error("compatibility error: {0}")]
    Compatibility(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line tool.
    ///
    /// 2 = configuration, 3 = training failure, 4 = data (including inputs
    /// the statistics cannot be computed from). I/O failures exit with 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::NonFiniteGradient { .. } | Error::Numerical(_) | Error::Sweep(_) => 3,
            Error::Data(_)
            | Error::Parse { .. }
            | Error::Label(_)
            | Error::Template(_)
            | Error::Vocabulary { .. }
            | Error::Capacity(_)
            | Error::Compatibility(_)
            | Error::Format(_)
            | Error::Integrity(_)
            | Error::UndefinedMetric { .. }
            | Error::Attribute(_)
            | Error::Statistics(_)
            | Error::Aggregation(_) => 4,
            Error::Io { .. } => 1,
        }
    }
}
