use thiserror::Error;

/// Errors surfaced by the library. The CLI maps these onto exit codes:
/// config/usage problems are distinct from data problems and from
/// numerical failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("unknown {kind} id: {id}")]
    Lookup { kind: &'static str, id: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numerical failure at epoch {epoch}: {msg}")]
    Numerical { epoch: usize, msg: String },

    #[error("training data contains a single class ({0}); fall back to a constant classifier")]
    SingleClass(String),
}

pub type Result<T> = std::result::Result<T, Error>;
