//! `--config` override files: a JSON document whose present fields replace
//! the matching preset values.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mmn::model::ModelConfig;
use mmn::training::TrainConfig;
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    // model
    pub d_emb: Option<usize>,
    pub kernel_size: Option<usize>,
    pub encoder_layers: Option<usize>,
    pub decoder_layers: Option<usize>,
    pub memory_layers: Option<Vec<usize>>,
    pub eps_smooth: Option<f64>,
    pub output_bias: Option<bool>,
    pub freeze_embeddings: Option<bool>,
    // corpus
    pub vocab_budget: Option<usize>,
    // training
    pub lr_init: Option<f64>,
    pub lr_floor: Option<f64>,
    pub grad_clip: Option<f64>,
    pub max_epochs: Option<usize>,
    pub batch_size: Option<usize>,
    /// Pretrained embedding vectors in the textual format.
    pub embeddings: Option<PathBuf>,
}

impl ConfigOverrides {
    pub fn load(path: Option<&Path>) -> Result<ConfigOverrides> {
        match path {
            None => Ok(ConfigOverrides::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config overrides {}", p.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config overrides {}", p.display()))
            }
        }
    }

    pub fn apply_model(&self, config: &mut ModelConfig) {
        if let Some(v) = self.d_emb {
            config.d_emb = v;
        }
        if let Some(v) = self.kernel_size {
            config.kernel_size = v;
        }
        if let Some(v) = self.encoder_layers {
            config.encoder_layers = v;
        }
        if let Some(v) = self.decoder_layers {
            config.decoder_layers = v;
        }
        if let Some(v) = &self.memory_layers {
            config.memory_layers = v.clone();
        }
        if let Some(v) = self.eps_smooth {
            config.eps_smooth = v;
        }
        if let Some(v) = self.output_bias {
            config.output_bias = v;
        }
        if let Some(v) = self.freeze_embeddings {
            config.freeze_embeddings = v;
        }
    }

    pub fn apply_train(&self, config: &mut TrainConfig) {
        if let Some(v) = self.lr_init {
            config.lr_init = v;
        }
        if let Some(v) = self.lr_floor {
            config.lr_floor = v;
        }
        if let Some(v) = self.grad_clip {
            config.grad_clip = v;
        }
        if let Some(v) = self.max_epochs {
            config.max_epochs = v;
        }
        if let Some(v) = self.batch_size {
            config.batch_size = v;
        }
    }
}
