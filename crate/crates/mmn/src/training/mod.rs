//! Label-smoothed training with the step-decay Adam schedule, plus
//! perplexity/ROUGE evaluation and the overfit smoke harness.

pub mod eval;
pub mod loss;
pub mod schedule;
pub mod smoke;
pub mod trainer;

pub use eval::{evaluate, perplexity, reference_content, EvalReport};
pub use loss::{label_smoothed_loss, loss_floor, smoothed_target, smoothed_target_mass};
pub use schedule::{lr_schedule, TrainConfig, LR_DECAY_EPOCHS, LR_DECAY_FACTOR};
pub use smoke::{
    mean_smoothed_loss, overfit_smoke, shuffled_labels, smoke_model_config, synthetic_fixture,
    SmokeConfig, SmokeOutcome,
};
pub use trainer::{train, write_loss_csv, StepRecord, TrainOutcome};

#[derive(Debug)]
pub enum TrainError {
    EmptyTrainSet,
    EmptyEvalSet,
    BadConfig(String),
    Diverged { epoch: usize, step: usize, loss: f64 },
    Io(std::io::Error),
}

impl std::fmt::Display for TrainError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TrainError::EmptyTrainSet => write!(f, "training set is empty"),
            TrainError::EmptyEvalSet => write!(f, "evaluation set is empty"),
            TrainError::BadConfig(msg) => write!(f, "bad configuration: {}", msg),
            TrainError::Diverged { epoch, step, loss } => {
                write!(f, "training diverged at epoch {}, step {} (loss {})", epoch, step, loss)
            }
            TrainError::Io(e) => write!(f, "io error: {}", e),
        }
    }
}

impl std::error::Error for TrainError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            TrainError::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for TrainError {
    fn from(e: std::io::Error) -> Self {
        TrainError::Io(e)
    }
}
