use std::io;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("input has length {got}, expected {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("not enough data: {0}")]
    InsufficientData(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
