//! Model files, batch-norm folding and the random-model factory.

mod file;
mod template;

pub use file::{load_model, save_model, FileLayer, ModelFile, FORMAT_VERSION, MAGIC};
pub use template::{random_model, ArchitectureTemplate, Block};

use thiserror::Error;

use crate::network::NetworkError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("truncated file while reading {0}")]
    Truncated(&'static str),
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("payload holds {got} floats, layer table declares {expected}")]
    PayloadLength { expected: u64, got: u64 },
    #[error("layer {layer}: unknown layer kind {kind}")]
    UnknownKind { layer: usize, kind: u8 },
    #[error("layer {layer}: {reason}")]
    Shape { layer: usize, reason: String },
    #[error("layer {layer}: batch norm must directly follow a conv without fused activation")]
    UnfoldableBatchNorm { layer: usize },
    #[error("invalid template: {0}")]
    BadTemplate(String),
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}
