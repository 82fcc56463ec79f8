//! Tokenizer and the dual encoders producing unit-norm embeddings in the
//! shared contrastive space, with checkpoint serialization.

mod checkpoint;
mod model;
mod vocab;

pub use checkpoint::{checkpoint_file_digest, load_checkpoint, save_checkpoint, Checkpoint};
pub use model::{
    raster_to_input, ArchConfig, ConvLayer, Embedding, ImageCache, ModelParams, TensorEntry,
    TextCache,
};
pub use vocab::{Vocab, PAD, UNK};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("raster shape mismatch: expected {expected}, got {got}")]
    ShapeError { expected: String, got: String },
    #[error("bad magic bytes: not a checkpoint file")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint file truncated or corrupted")]
    Truncated,
    #[error("vocab digest mismatch: expected {expected}, found {found}")]
    DigestMismatch { expected: String, found: String },
    #[error("tensor {0} contains non-finite values")]
    NonFinite(String),
    #[error("malformed vocab file {0}")]
    BadVocabFile(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
