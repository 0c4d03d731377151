use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("non-triangular face at line {0}")]
    NonTriangular(usize),

    #[error("face {face}: {message}")]
    InvalidFace { face: usize, message: String },

    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },

    #[error("no adjacent face pairs")]
    NoAdjacentFaces,

    #[error("mesh topology mismatch: {0}")]
    TopologyMismatch(String),

    #[error("empty mesh")]
    EmptyMesh,

    #[error("face {0} is degenerate")]
    DegenerateFace(usize),

    #[error("degenerate patch normal at face {0}")]
    DegeneratePatchNormal(usize),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("bad {kind} file: {message}")]
    Format { kind: &'static str, message: String },

    #[error("missing weights for CNN {0}")]
    MissingWeights(usize),

    #[error(transparent)]
    Network(#[from] normalnet_nn::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}
