//! Teacher-forced training loop: per-batch tape, label-smoothed loss,
//! global-norm clipping, Adam with the step-decay schedule.

use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

use crate::corpus::Example;
use crate::model::{teacher_forced_loss, ModelConfig, Parameters};
use crate::numerics::{clip_gradients, AdamState, Tape};

use super::schedule::{lr_schedule, TrainConfig};
use super::TrainError;

/// One optimizer step's record in the loss curve.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
}

/// Loss curve plus per-epoch means.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainOutcome {
    pub records: Vec<StepRecord>,
    pub epoch_mean_loss: Vec<f64>,
}

impl TrainOutcome {
    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_mean_loss.last().copied()
    }
}

/// Trains in place. Batches draw a fresh deterministic shuffle every epoch;
/// each batch runs its examples on one tape, averages their losses, and
/// takes a single clipped Adam step. A non-finite loss aborts with the
/// failing epoch/step in the error.
pub fn train(
    examples: &[Example],
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    params: &mut Parameters<f32>,
    adam: &mut AdamState<f32>,
) -> Result<TrainOutcome, TrainError> {
    if examples.is_empty() {
        return Err(TrainError::EmptyTrainSet);
    }
    model_config.validate().map_err(TrainError::BadConfig)?;
    train_config.validate().map_err(TrainError::BadConfig)?;
    for (idx, e) in examples.iter().enumerate() {
        if e.document_ids.is_empty() || e.summary_ids.is_empty() {
            return Err(TrainError::BadConfig(format!("example {} is empty", idx)));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(train_config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut outcome = TrainOutcome::default();
    let mut step = 0usize;

    for epoch in 0..train_config.max_epochs {
        order.shuffle(&mut rng);
        let lr = lr_schedule(epoch, train_config);
        let mut epoch_loss = 0.0;
        let mut epoch_batches = 0usize;
        for batch in order.chunks(train_config.batch_size) {
            let mut tape = Tape::new();
            let bound = params.bind(&mut tape);
            let mut mean_loss = None;
            for &i in batch {
                let e = &examples[i];
                let loss =
                    teacher_forced_loss(&mut tape, &bound, model_config, &e.document_ids, &e.summary_ids);
                mean_loss = Some(match mean_loss {
                    None => loss,
                    Some(acc) => tape.add(acc, loss),
                });
            }
            let total = mean_loss.expect("non-empty batch");
            let mean = tape.scale(total, 1.0 / batch.len() as f32);
            let loss_value = tape.scalar(mean) as f64;
            if !loss_value.is_finite() {
                return Err(TrainError::Diverged { epoch, step, loss: loss_value });
            }
            let grads = tape.backward(mean);
            params.zero_grads();
            params.absorb_grads(&bound, &grads);
            clip_gradients(params.map_mut(), train_config.grad_clip as f32);
            adam.step(params.map_mut(), lr as f32);

            outcome.records.push(StepRecord { epoch, step, lr, loss: loss_value });
            epoch_loss += loss_value;
            epoch_batches += 1;
            step += 1;
        }
        outcome.epoch_mean_loss.push(epoch_loss / epoch_batches as f64);
    }
    Ok(outcome)
}

/// Writes the loss curve as `epoch,step,lr,loss` CSV rows.
pub fn write_loss_csv(path: &Path, records: &[StepRecord]) -> Result<(), TrainError> {
    let mut out = String::from("epoch,step,lr,loss\n");
    for r in records {
        out.push_str(&format!("{},{},{},{}\n", r.epoch, r.step, r.lr, r.loss));
    }
    std::fs::write(path, out)?;
    Ok(())
}
