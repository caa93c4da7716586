//! The multi-level memory network: dilated-convolution encoder, key/value
//! memories drawn from several encoder depths, a causal decoder globally
//! conditioned on the pooled document embedding, and per-level memory
//! attention feeding the output projection.

pub mod checkpoint;
pub mod config;
pub mod infer;
pub mod network;
pub mod params;

pub use config::{receptive_field, ModelConfig, EPS_LAYER_NORM};
pub use infer::{argmax, DecodeState, EncodedDocument, InferenceModel};
pub use network::{
    attend, build_memories, decoder_input, decoder_states, encode, ngtu_block, output_logits,
    teacher_forced_logits, teacher_forced_loss, EncoderOutput, MemoryLevel, MemorySet,
};
pub use params::{expected_shapes, load_pretrained_embeddings, BoundParams, Parameters};

/// Model-stage failures (checkpointing, embedding files, config mismatch).
#[derive(Debug)]
pub enum ModelError {
    Io(std::io::Error),
    BadMagic { found: [u8; 4] },
    ShapeMismatch { name: String, expected: Vec<usize>, found: Vec<usize> },
    EmbeddingDimMismatch { expected: usize, found: usize, line: usize },
    ConfigMismatch { what: String },
    Malformed { what: String },
}

impl std::fmt::Display for ModelError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelError::Io(e) => write!(f, "io error: {}", e),
            ModelError::BadMagic { found } => {
                write!(f, "not a checkpoint file (magic bytes {:?})", found)
            }
            ModelError::ShapeMismatch { name, expected, found } => write!(
                f,
                "tensor {:?} has shape {:?} but the configuration implies {:?}",
                name, found, expected
            ),
            ModelError::EmbeddingDimMismatch { expected, found, line } => write!(
                f,
                "embedding file line {} has {} values, expected {}",
                line, found, expected
            ),
            ModelError::ConfigMismatch { what } => write!(f, "configuration mismatch: {}", what),
            ModelError::Malformed { what } => write!(f, "malformed input: {}", what),
        }
    }
}

impl std::error::Error for ModelError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            ModelError::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for ModelError {
    fn from(e: std::io::Error) -> Self {
        ModelError::Io(e)
    }
}
