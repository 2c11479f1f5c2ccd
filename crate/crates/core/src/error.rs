use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

/// Errors raised by the core pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("class {class} does not appear in the dataset")]
    MissingClass { class: usize },
    #[error("label value {value} out of range for {num_classes} classes")]
    LabelOutOfRange { value: usize, num_classes: usize },
    #[error("non-finite latent at step {step}")]
    NonFinite { step: usize },
    #[error("non-finite gradient at step {step}, guidance iteration {iteration}")]
    NonFiniteGradient { step: usize, iteration: usize },
    #[error("mask has no set pixels")]
    EmptyMask,
    #[error("zero total attention at masked location (row {row}, col {col})")]
    ZeroAttention { row: usize, col: usize },
    #[error("zero-length {0} edit direction")]
    ZeroDirection(&'static str),
    #[error("unknown attribute value {value:?}; vocabulary: {vocabulary:?}")]
    UnknownAttributeValue {
        value: String,
        vocabulary: Vec<String>,
    },
    #[error("caption has no recognizable subject noun: {0:?}")]
    NoSubject(String),
    #[error("training diverged at step {step} (loss {loss}, t = {t})")]
    Diverged { step: usize, loss: f64, t: usize },
    #[error("transform moves the object outside the image bounds")]
    OutOfBounds,
    #[error("no pixels to evaluate")]
    EmptyEvaluation,
    #[error("missing baseline subset {0:?}")]
    MissingBaseline(String),
    #[error("backend failure: {0}")]
    Backend(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn shape_err(what: impl Into<String>) -> Error {
    Error::Shape(what.into())
}

pub(crate) fn invalid(what: impl Into<String>) -> Error {
    Error::Invalid(what.into())
}
