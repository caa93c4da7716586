//! Named experiment presets bundling the model and training
//! hyperparameters per dataset.

use std::str::FromStr;

use crate::corpus::SummaryProfile;
use crate::model::ModelConfig;
use crate::training::TrainConfig;

/// The four experiment configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    TifuShort,
    TifuLong,
    NewsroomAbs,
    Xsum,
}

impl Preset {
    pub const ALL: [Preset; 4] =
        [Preset::TifuShort, Preset::TifuLong, Preset::NewsroomAbs, Preset::Xsum];

    pub fn name(self) -> &'static str {
        match self {
            Preset::TifuShort => "tifu-short",
            Preset::TifuLong => "tifu-long",
            Preset::NewsroomAbs => "newsroom-abs",
            Preset::Xsum => "xsum",
        }
    }

    /// Non-reserved vocabulary budget.
    pub fn vocab_budget(self) -> usize {
        match self {
            Preset::TifuShort | Preset::TifuLong => 15_000,
            Preset::NewsroomAbs => 40_000,
            Preset::Xsum => 50_000,
        }
    }

    /// Which corpus field is the summary and its length cap.
    pub fn summary_profile(self) -> SummaryProfile {
        match self {
            Preset::TifuShort => SummaryProfile::Short,
            _ => SummaryProfile::Long,
        }
    }

    /// Decode-length cap used by evaluation and the summarize command.
    pub fn max_summary_len(self) -> usize {
        self.summary_profile().summary_cap()
    }

    /// Network hyperparameters. `vocab_size` comes from the actual built
    /// vocabulary (budget + reserved tokens at most).
    pub fn model_config(self, vocab_size: usize) -> ModelConfig {
        let (encoder_layers, decoder_layers, memory_layers, eps_smooth) = match self {
            Preset::TifuShort => (9, 3, vec![3, 6, 9], 0.1),
            Preset::TifuLong => (8, 5, vec![4, 8], 0.05),
            Preset::NewsroomAbs => (10, 6, vec![3, 6, 10], 0.05),
            Preset::Xsum => (9, 6, vec![4, 7, 9], 0.05),
        };
        ModelConfig {
            vocab_size,
            d_emb: 300,
            kernel_size: 3,
            encoder_layers,
            decoder_layers,
            memory_layers,
            eps_smooth,
            output_bias: true,
            freeze_embeddings: false,
        }
    }

    pub fn train_config(self, seed: u64) -> TrainConfig {
        let (grad_clip, max_epochs) = match self {
            Preset::TifuShort => (0.3, 12),
            Preset::TifuLong => (0.3, 60),
            Preset::NewsroomAbs => (0.3, 12),
            Preset::Xsum => (0.8, 12),
        };
        TrainConfig {
            lr_init: 0.001,
            lr_floor: 0.0001,
            grad_clip,
            max_epochs,
            batch_size: 16,
            seed,
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                format!(
                    "unknown profile {:?}; expected one of {}",
                    s,
                    Preset::ALL.map(|p| p.name()).join(", ")
                )
            })
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_constants_match_the_experiment_table() {
        let short = Preset::TifuShort.model_config(15_004);
        assert_eq!(short.encoder_layers, 9);
        assert_eq!(short.decoder_layers, 3);
        assert_eq!(short.memory_layers, vec![3, 6, 9]);
        assert_eq!(short.eps_smooth, 0.1);
        assert_eq!(short.d_emb, 300);
        assert_eq!(short.kernel_size, 3);

        let long = Preset::TifuLong.model_config(15_004);
        assert_eq!(long.encoder_layers, 8);
        assert_eq!(long.decoder_layers, 5);
        assert_eq!(long.memory_layers, vec![4, 8]);
        assert_eq!(long.eps_smooth, 0.05);

        let newsroom = Preset::NewsroomAbs.model_config(40_004);
        assert_eq!(newsroom.encoder_layers, 10);
        assert_eq!(newsroom.decoder_layers, 6);
        assert_eq!(newsroom.memory_layers, vec![3, 6, 10]);

        let xsum = Preset::Xsum.model_config(50_004);
        assert_eq!(xsum.encoder_layers, 9);
        assert_eq!(xsum.decoder_layers, 6);
        assert_eq!(xsum.memory_layers, vec![4, 7, 9]);
    }

    #[test]
    fn clip_and_epoch_presets() {
        assert_eq!(Preset::TifuShort.train_config(1).grad_clip, 0.3);
        assert_eq!(Preset::TifuLong.train_config(1).grad_clip, 0.3);
        assert_eq!(Preset::Xsum.train_config(1).grad_clip, 0.8);
        assert_eq!(Preset::TifuShort.train_config(1).max_epochs, 12);
        assert_eq!(Preset::TifuLong.train_config(1).max_epochs, 60);
    }

    #[test]
    fn names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!("nope".parse::<Preset>().is_err());
    }

    #[test]
    fn vocab_budgets() {
        assert_eq!(Preset::TifuShort.vocab_budget(), 15_000);
        assert_eq!(Preset::NewsroomAbs.vocab_budget(), 40_000);
        assert_eq!(Preset::Xsum.vocab_budget(), 50_000);
    }

    #[test]
    fn memory_layers_sit_inside_encoder_depth() {
        for p in Preset::ALL {
            assert!(p.model_config(1000).validate().is_ok(), "{}", p);
        }
    }
}
