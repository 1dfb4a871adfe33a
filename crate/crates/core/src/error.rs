use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    Shape {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("merge precondition `{clause}` violated: {detail}")]
    MergePrecondition { clause: &'static str, detail: String },

    #[error("unsupported network shape: {0}")]
    UnsupportedShape(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("degenerate LP: {0}")]
    DegenerateLp(String),

    #[error("star constraint set is empty")]
    EmptyStar,

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
}

impl Error {
    pub(crate) fn shape(context: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::Shape {
            context: context.into(),
            expected,
            found,
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
