use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unusable model: {0}")]
    UnusableModel(String),
    #[error("insufficient scene data: {got} points, need at least {need}")]
    InsufficientScene { got: usize, need: usize },
    #[error("registration infeasible: {0}")]
    Infeasible(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("out-of-order window for worker {worker}: start {start} precedes latest {latest}")]
    OutOfOrder { worker: String, start: f64, latest: f64 },
    #[error("line {line}: {source}")]
    AtLine { line: usize, source: Box<Error> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
