use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input length is not usable by the transform (not dyadic, too short, ...).
    #[error("sizing error: {0}")]
    Sizing(String),

    /// A coefficient pyramid whose level sizes do not fit together.
    #[error("structural error: {0}")]
    Structure(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown {kind} `{name}` (supported: {supported})")]
    UnknownName {
        kind: &'static str,
        name: String,
        supported: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("fit failed: all {starts} starts failed ({details})")]
    Fit { starts: usize, details: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported format: {0}")]
    Format(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for errors caused by floating-point or optimizer breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self.root(), Error::Numerical(_) | Error::Fit { .. })
    }
}
