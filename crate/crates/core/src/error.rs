use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },

    #[error("unknown call direction {0:?}")]
    UnknownDirection(String),

    #[error("dataset contains no events")]
    EmptyDataset,

    #[error("observation window is empty")]
    EmptyWindow,

    #[error("series has zero variance")]
    ZeroVariance,

    #[error("lag {lag} too large for series of length {len}")]
    LagTooLarge { lag: usize, len: usize },

    #[error("series of length {0} is too short for a portmanteau test")]
    SeriesTooShort(usize),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("sample {0} is not strictly positive")]
    NonPositiveSample(f64),

    #[error("ego {0} has no outgoing calls")]
    NoOutgoingCalls(String),

    #[error("ego has {got} events, need at least {needed}")]
    TooFewEvents { needed: usize, got: usize },

    #[error("class set is empty")]
    EmptyClassSet,

    #[error("event is not an outgoing call")]
    NotOutgoing,

    #[error("training data covers fewer than two classes")]
    SingleClass,

    #[error("no training examples")]
    NoExamples,

    #[error("loss became non-finite during training")]
    NonFiniteLoss,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no in-class outgoing test calls")]
    NoTestCalls,

    #[error("no eligible egos in dataset")]
    NoEligibleEgos,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("model file: {0}")]
    ModelFormat(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
