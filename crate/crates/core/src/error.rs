use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid process: {0}")]
    InvalidProcess(String),
    #[error("singular chain: balance equations have no unique solution")]
    SingularChain,
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),
    #[error("degenerate marginal: designated symbol has probability {0}")]
    DegenerateMarginal(String),
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),
    #[error("parameter search exhausted: {0}")]
    SearchExhausted(String),
    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),
    #[error("malformed skeleton: {0}")]
    MalformedSkeleton(String),
    #[error("malformed block decomposition: {0}")]
    MalformedDecomposition(String),
    #[error("cap exceeded: {0}")]
    CapExceeded(String),
    #[error("input society is not robust: {0}")]
    NotRobustInput(String),
    #[error("society failed robustness: {0}")]
    NotRobust(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// A structurally equal copy; io and json errors keep only their message.
    pub fn duplicate(&self) -> Error {
        match self {
            Error::Parse(m) => Error::Parse(m.clone()),
            Error::InvalidProcess(m) => Error::InvalidProcess(m.clone()),
            Error::SingularChain => Error::SingularChain,
            Error::AlphabetMismatch(m) => Error::AlphabetMismatch(m.clone()),
            Error::DegenerateMarginal(m) => Error::DegenerateMarginal(m.clone()),
            Error::ConstraintViolation(m) => Error::ConstraintViolation(m.clone()),
            Error::SearchExhausted(m) => Error::SearchExhausted(m.clone()),
            Error::NoConvergence(n) => Error::NoConvergence(*n),
            Error::MalformedSkeleton(m) => Error::MalformedSkeleton(m.clone()),
            Error::MalformedDecomposition(m) => Error::MalformedDecomposition(m.clone()),
            Error::CapExceeded(m) => Error::CapExceeded(m.clone()),
            Error::NotRobustInput(m) => Error::NotRobustInput(m.clone()),
            Error::NotRobust(m) => Error::NotRobust(m.clone()),
            Error::Unsupported(m) => Error::Unsupported(m.clone()),
            Error::Io(e) => Error::Io(std::io::Error::new(e.kind(), e.to_string())),
            Error::Json(e) => Error::Parse(e.to_string()),
        }
    }

    /// Stable machine-readable tag used in CLI error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse(_) => "Parse",
            Error::InvalidProcess(_) => "InvalidProcess",
            Error::SingularChain => "SingularChain",
            Error::AlphabetMismatch(_) => "AlphabetMismatch",
            Error::DegenerateMarginal(_) => "DegenerateMarginal",
            Error::ConstraintViolation(_) => "ConstraintViolation",
            Error::SearchExhausted(_) => "SearchExhausted",
            Error::NoConvergence(_) => "NoConvergence",
            Error::MalformedSkeleton(_) => "MalformedSkeleton",
            Error::MalformedDecomposition(_) => "MalformedDecomposition",
            Error::CapExceeded(_) => "CapExceeded",
            Error::NotRobustInput(_) => "NotRobustInput",
            Error::NotRobust(_) => "NotRobust",
            Error::Unsupported(_) => "Unsupported",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}
