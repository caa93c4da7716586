//! Network hyperparameters and receptive-field arithmetic.

use serde::{Deserialize, Serialize};

/// Layer-norm variance epsilon used throughout the network.
pub const EPS_LAYER_NORM: f64 = 1e-5;

/// Hyperparameters of one summarizer instance. Serialized verbatim into
/// checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Vocabulary size V, including the four reserved tokens.
    pub vocab_size: usize,
    /// Embedding width shared by encoder and decoder.
    pub d_emb: usize,
    /// Convolution kernel size k (odd).
    pub kernel_size: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    /// Ascending 1-based encoder layer indices used as memory levels (m).
    pub memory_layers: Vec<usize>,
    /// Label-smoothing ε.
    pub eps_smooth: f64,
    /// Include a bias term on the output projection.
    pub output_bias: bool,
    /// Keep the embedding matrix fixed after initialization.
    pub freeze_embeddings: bool,
}

impl ModelConfig {
    /// Number of memory levels S.
    pub fn levels(&self) -> usize {
        self.memory_layers.len()
    }

    /// Dilation of 1-based layer `l`: doubling schedule 1, 2, 4, …
    pub fn dilation(l: usize) -> usize {
        assert!(l >= 1, "layers are 1-based");
        1 << (l - 1)
    }

    /// Receptive field of encoder layer `l` under the doubling schedule.
    pub fn encoder_receptive_field(&self, l: usize) -> usize {
        let dilations: Vec<usize> = (1..=l).map(Self::dilation).collect();
        receptive_field(self.kernel_size, &dilations)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.kernel_size % 2 == 0 {
            return Err(format!("kernel size must be odd, got {}", self.kernel_size));
        }
        if self.d_emb < 2 {
            return Err("embedding width must be at least 2".to_string());
        }
        if self.vocab_size < 5 {
            return Err("vocabulary must hold the reserved tokens plus content".to_string());
        }
        if self.encoder_layers == 0 || self.decoder_layers == 0 {
            return Err("encoder and decoder need at least one layer".to_string());
        }
        if self.memory_layers.is_empty() {
            return Err("at least one memory level is required".to_string());
        }
        if !self.memory_layers.windows(2).all(|w| w[0] < w[1]) {
            return Err(format!("memory layers must be strictly ascending, got {:?}", self.memory_layers));
        }
        for &m in &self.memory_layers {
            if m < 1 || m > self.encoder_layers {
                return Err(format!(
                    "memory layer {} outside encoder depth {}",
                    m, self.encoder_layers
                ));
            }
        }
        if !(0.0..1.0).contains(&self.eps_smooth) {
            return Err(format!("smoothing eps must be in [0, 1), got {}", self.eps_smooth));
        }
        Ok(())
    }
}

/// Receptive field of a convolution stack: `1 + Σ (k−1)·d_l`.
pub fn receptive_field(kernel_size: usize, dilations: &[usize]) -> usize {
    1 + dilations.iter().map(|d| (kernel_size - 1) * d).sum::<usize>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ModelConfig {
        ModelConfig {
            vocab_size: 64,
            d_emb: 32,
            kernel_size: 3,
            encoder_layers: 3,
            decoder_layers: 2,
            memory_layers: vec![1, 3],
            eps_smooth: 0.1,
            output_bias: true,
            freeze_embeddings: false,
        }
    }

    #[test]
    fn six_plain_layers_give_thirteen() {
        assert_eq!(receptive_field(3, &[1; 6]), 13);
    }

    #[test]
    fn doubling_schedule_gives_31_and_511() {
        let cfg = toy();
        assert_eq!(cfg.encoder_receptive_field(4), 31);
        assert_eq!(cfg.encoder_receptive_field(8), 511);
    }

    #[test]
    fn dilations_double_per_layer() {
        let d: Vec<usize> = (1..=5).map(ModelConfig::dilation).collect();
        assert_eq!(d, vec![1, 2, 4, 8, 16]);
    }

    #[test]
    fn validation_catches_bad_memory_layers() {
        let mut cfg = toy();
        cfg.memory_layers = vec![1, 4];
        assert!(cfg.validate().is_err());
        cfg.memory_layers = vec![2, 2];
        assert!(cfg.validate().is_err());
        cfg.memory_layers = vec![];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn validation_requires_odd_kernel() {
        let mut cfg = toy();
        cfg.kernel_size = 4;
        assert!(cfg.validate().is_err());
        cfg.kernel_size = 3;
        assert!(cfg.validate().is_ok());
    }
}
