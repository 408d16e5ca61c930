//! Desk-scale translation model for generating code-switched text from Hindi,
//! with denoising, back-translation and supervised objectives.

pub mod checkpoint;
pub mod curriculum;
pub mod graph;
pub mod model;
pub mod noise;
pub mod train;

use thiserror::Error;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use curriculum::{run_curriculum, CurriculumConfig, CurriculumStage, Mode};
pub use model::{Direction, ModelConfig, Partition, Side, TcsModel, Vocab};
pub use noise::{noise, NoiseConfig};
pub use train::{bt_step, ce_step, dae_loss, dae_step, Adam, LossWeights};

#[derive(Debug, Error)]
pub enum TcsError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Decode(#[from] crate::codec::DecodeError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, TcsError>;
