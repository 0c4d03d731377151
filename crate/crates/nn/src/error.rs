use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("layer {layer}: {message}")]
    Shape { layer: String, message: String },

    #[error("input shape {got:?} does not match network input {expected:?}")]
    InputShape {
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("weights do not match spec at {layer}: {message}")]
    WeightsMismatch { layer: String, message: String },

    #[error("non-finite loss ({0})")]
    NonFiniteLoss(f64),

    #[error("bad weights file: {0}")]
    Format(String),

    #[error("unexpected end of weights blob")]
    Truncated,

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
