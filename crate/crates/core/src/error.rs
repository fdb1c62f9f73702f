use thiserror::Error;

/// Errors raised by the numerical modules and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("singular operator: {0}")]
    SingularOperator(String),

    #[error("state is not unit-normalized (norm {norm})")]
    Normalization { norm: f64 },

    #[error("optimization did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    Optimization { iterations: usize, grad_norm: f64 },

    #[error("no real root: {0}")]
    NoRealRoot(String),

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("polar decomposition failed: {0}")]
    PolarDecomposition(String),

    #[error("non-ergodic walk configuration: {absorbed} of {trials} trials absorbed")]
    NonErgodic { absorbed: usize, trials: usize },

    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn config(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn numeric(msg: impl Into<String>) -> Error {
    Error::Numeric(msg.into())
}
