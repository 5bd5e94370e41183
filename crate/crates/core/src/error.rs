use thiserror::Error;

/// Errors shared by all modules of the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown generator label `{0}`")]
    UnknownGenerator(String),
    #[error("words belong to different ambient groups")]
    GroupMismatch,
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("arity mismatch: {0}")]
    Arity(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("target groups do not match")]
    TargetMismatch,
    #[error("map is not surjective")]
    NotSurjective,
    #[error("infinite index where a finite index is required")]
    InfiniteIndex,
    #[error("unsupported representation: {0}")]
    Unsupported(String),
    #[error("not a section: {0}")]
    NotASection(String),
    #[error("limit exceeded: {0}")]
    Limit(String),
    #[error("inconsistent flags: {0}")]
    Inconsistent(String),
    #[error("internal inconsistency: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
