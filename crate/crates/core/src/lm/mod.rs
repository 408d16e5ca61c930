//! Language-model utilities: an n-gram perplexity harness and the mix-review
//! sampling schedule used when fine-tuning on code-switched data.

pub mod mixreview;
pub mod ngram;

use thiserror::Error;

pub use mixreview::{mix_review_batches, mix_review_fraction, MixReviewBatches, MixReviewSchedule};
pub use ngram::{perplexity, train_ngram, NgramLm};

#[derive(Debug, Error, PartialEq)]
pub enum LmError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training corpus is empty")]
    EmptyCorpus,
}

pub type Result<T> = std::result::Result<T, LmError>;
