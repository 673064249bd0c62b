use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: expected {expected} channel values, found {found}")]
    ChannelMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("header declares {declared} frames but {found} were parsed")]
    FrameCount { declared: usize, found: usize },
    #[error("missing section: {0}")]
    MissingSection(&'static str),
    #[error("invalid hierarchy: {0}")]
    InvalidHierarchy(String),
    #[error("degenerate skeleton: {0}")]
    DegenerateSkeleton(String),
    #[error("unknown joint `{0}`")]
    UnknownJoint(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("class {0} has no original samples")]
    EmptyClass(String),
    #[error("cannot balance: {0}")]
    Unbalanceable(String),
    #[error("too few samples: {0}")]
    TooFewSamples(String),
    #[error("feature schema hash mismatch: checkpoint {expected}, features {found}")]
    SchemaMismatch { expected: String, found: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("malformed {kind} file: {message}")]
    Format { kind: &'static str, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable category, used by the command-line front end.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "syntax",
            Error::ChannelMismatch { .. } => "channel-mismatch",
            Error::FrameCount { .. } => "frame-count",
            Error::MissingSection(_) => "missing-section",
            Error::InvalidHierarchy(_) => "invalid-hierarchy",
            Error::DegenerateSkeleton(_) => "degenerate-skeleton",
            Error::UnknownJoint(_) => "unknown-joint",
            Error::ShapeMismatch(_) => "shape-mismatch",
            Error::EmptyClass(_) => "empty-class",
            Error::Unbalanceable(_) => "unbalanceable",
            Error::TooFewSamples(_) => "too-few-samples",
            Error::SchemaMismatch { .. } => "schema-mismatch",
            Error::Config(_) => "config",
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(kind: &'static str, message: impl Into<String>) -> Self {
        Error::Format {
            kind,
            message: message.into(),
        }
    }
}
