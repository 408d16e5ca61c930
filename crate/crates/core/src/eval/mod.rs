//! Generation-quality metrics.

pub mod bleu;
pub mod diversity;

use thiserror::Error;

pub use bleu::{corpus_bleu, corpus_bleu_tokens, self_bleu, sentence_bleu, BleuScore, BleuStats};
pub use diversity::{gzip_diversity, DiversityReport};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("{candidates} candidates but {references} reference sets")]
    SizeMismatch { candidates: usize, references: usize },
    #[error("candidate {0} has no reference")]
    NoReference(usize),
    #[error("{0}")]
    Undefined(&'static str),
}

pub type Result<T> = std::result::Result<T, EvalError>;
