//! Next-call prediction from call logs.
//!
//! The crate ingests call-detail records, tests ego–alter pairs for temporal
//! regularity, trains one linear probabilistic classifier per ego on
//! clock, weekday and last-call features, and scores top-k recommendation
//! lists against last-k and most-frequent baselines.

// `!(x > 0.0)` is used deliberately so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod behavior;
pub mod calldata;
pub mod classifier;
pub mod cli;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod model;
pub mod report;
pub mod stats;
pub mod synth;

pub use behavior::{eligible_egos, filter_alters, split_chronological, EgoModelConfig, FilteredEgo};
pub use calldata::{
    group_pairs, parse_call_log, read_call_log, summarize, CallEvent, Dataset, DatasetSummary,
    Direction, EgoLog, TimeZone, Timestamp, Window,
};
pub use classifier::{ModelWeights, TrainConfig};
pub use error::{Error, Result};
pub use evaluation::{evaluate_dataset, EvalConfig, EvaluationReport, Method};
pub use model::EgoModel;
pub use synth::{generate, GeneratorConfig, Regime};
